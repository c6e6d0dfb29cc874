"""Interior covering, connectivity graphs and discrete harmonic fields.

The vertex set Y has three roles: interior cover centers (with scale
eta_tilde), boundary-adjacent interior-ball centers y_k (with scale r_k) and
boundary cover centers p_k.  Edges join vertices whose scale balls overlap;
each p_k is joined to its y_k only.  On this graph we solve the screened
discrete Poisson problem (L u)(y) + |y - x| u(y) = delta_x with u = 0 on the
boundary role, enumerate ascent (admissible) paths, and measure stretch
factors against the Voronoi mesostructure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg
from scipy.spatial import cKDTree

from .geometry import ImplicitDomain
from .regularity import BoundaryCover, _grad_many

__all__ = [
    "ROLE_INTERIOR",
    "ROLE_NEAR_BOUNDARY",
    "ROLE_BOUNDARY",
    "InteriorCover",
    "ConnGraph",
    "HarmonicSolution",
    "PathFamily",
    "StretchResult",
    "interior_cover",
    "build_graph",
    "laplacian_apply",
    "solve_harmonic",
    "energy_identity",
    "harmonic_paths",
    "stretch_and_radius",
    "poisson_graph_distance",
    "write_stretch_csv",
    "dump_graph",
]

ROLE_INTERIOR = 0
ROLE_NEAR_BOUNDARY = 1
ROLE_BOUNDARY = 2

COVER_SHRINK = 1.0 / 8.0


# ---------------------------------------------------------------------------
# interior covering


@dataclass
class InteriorCover:
    points: np.ndarray
    eta_tilde: np.ndarray
    forced: np.ndarray          # mask: lattice seeds
    r: float

    def covering_index(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, float))
        tree = cKDTree(self.points)
        rmax = float(self.eta_tilde.max())
        out = np.full(len(xs), -1, int)
        for i, idx in enumerate(tree.query_ball_point(xs, rmax)):
            for j in idx:
                if np.linalg.norm(xs[i] - self.points[j]) <= self.eta_tilde[j]:
                    out[i] = j
                    break
        return out


def _interior_eta(domain: ImplicitDomain, pts: np.ndarray, r: float) -> np.ndarray:
    """eta(x) = min(dist proxy to boundary, 2r); the signed distance of a
    union under-estimates the interior distance, so this is conservative and
    1-Lipschitz."""
    return np.minimum(np.maximum(-domain.sdf(np.atleast_2d(pts)), 0.0), 2 * r)


def _thin_points(pts: np.ndarray, spacing: float) -> np.ndarray:
    if len(pts) == 0:
        return pts
    tree = cKDTree(pts)
    if len(pts) > 1 and float(tree.query(pts, k=2)[0][:, 1].min()) > spacing:
        return pts
    keep = np.zeros(len(pts), bool)
    covered = np.zeros(len(pts), bool)
    for i in range(len(pts)):
        if covered[i]:
            continue
        keep[i] = True
        for j in tree.query_ball_point(pts[i], spacing):
            covered[j] = True
    return pts[keep]


def _bulk_grid(domain, r, spacing, offset):
    window = domain.window
    axes = [np.arange(lo + offset, hi, spacing) for lo, hi in zip(window.lo, window.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([g.ravel() for g in mesh], axis=1)
    return grid[domain.sdf(grid) < -r / 8]


def _boundary_bands(domain, bpts, betas, r, growth, lateral):
    """Inward-normal offsets of the dense boundary samples at geometrically
    growing depths, laterally thinned proportionally to depth."""
    window = domain.window
    chunks = []
    t = float(betas.min()) / 3
    while t < 3 * r:
        band = bpts[betas / 3 <= t * (1 + 1e-9)]
        band = _thin_points(band, lateral * t)
        if len(band):
            normals = _grad_many(domain, band)
            q = band - t * normals
            q = q[(domain.sdf(q) <= -t / 2) & window.contains(q)]
            if len(q):
                chunks.append(q)
        t *= growth
    if not chunks:
        return np.empty((0, bpts.shape[1]))
    return np.concatenate(chunks, axis=0)


def _uncovered(points, centers, scales, tree=None):
    """Mask of points hit by no ball B_{scales[j]}(centers[j]).

    Centers are processed in geometric scale bins (largest first) so each KD
    range query uses the bin's own radius, and already-covered points drop out
    of later, denser bins."""
    points = np.atleast_2d(np.asarray(points, float))
    out = np.ones(len(points), bool)
    if len(centers) == 0 or len(points) == 0:
        return out
    scales = np.asarray(scales, float)
    smax = float(scales.max())
    bins = np.floor(np.log2(smax / np.maximum(scales, 1e-300))).astype(int)
    active = np.arange(len(points))
    for b in np.unique(bins):
        sel = np.flatnonzero(bins == b)
        btree = cKDTree(centers[sel])
        lists = btree.query_ball_point(points[active], float(scales[sel].max()), workers=-1)
        counts = np.fromiter((len(l) for l in lists), int, count=len(lists))
        if counts.sum() == 0:
            continue
        rep = np.repeat(np.arange(len(active)), counts)
        flat = sel[np.concatenate([l for l in lists if l])]
        d = np.linalg.norm(points[active][rep] - centers[flat], axis=1)
        hit = np.unique(rep[d <= scales[flat]])
        out[active[hit]] = False
        active = active[out[active]]
        if len(active) == 0:
            break
    return out


def interior_cover(
    domain: ImplicitDomain,
    boundary_cover: BoundaryCover,
    x_r: np.ndarray,
    r: float,
    depth_growth: float = 1.15,
    lateral_factor: float = 0.12,
    repair_rounds: int = 3,
) -> InteriorCover:
    """Multiscale cover of the interior P minus the boundary cover balls.

    Candidates: the lattice points (forced seeds), a bulk grid at spacing r/4,
    and inward-normal offsets of the dense boundary samples at geometrically
    growing depths (so shallow bands are laterally dense).  The scale is
    eta_tilde = eta/4 with eta(x) = min(dist(x, boundary), 2r); greedy
    selection by descending scale, each center claiming its (1 - 1/8)-shrunk
    ball, gives completeness over candidates plus the structural bounds
    |p1 - p2| >= (1/2) max(eta_tilde) and scale ratio >= 3/5 for intersecting
    balls.  Residual claim-margin gaps are closed by repair rounds that probe
    at halved band spacing and promote uncovered probes to centers.
    """
    x_r = np.atleast_2d(np.asarray(x_r, float))
    if len(x_r) == 0:
        raise ValueError("empty lattice seed set")
    bpts = boundary_cover.all_points
    betas = boundary_cover.all_eta_tilde

    cands = np.concatenate(
        [
            x_r,
            _bulk_grid(domain, r, r / 4, r / 8),
            _boundary_bands(domain, bpts, betas, r, depth_growth, lateral_factor),
        ],
        axis=0,
    )
    eta_tilde = _interior_eta(domain, cands, r) / 4
    ok = eta_tilde > 0
    ok[: len(x_r)] = True
    cands, eta_tilde = cands[ok], eta_tilde[ok]
    forced = np.zeros(len(cands), bool)
    forced[: len(x_r)] = True

    # greedy: forced seeds first (by descending scale), then the rest
    order = np.lexsort((np.arange(len(cands)), -eta_tilde, ~forced))
    tree = cKDTree(cands)
    covered = np.zeros(len(cands), bool)
    selected = []
    for i in order:
        if covered[i] and not forced[i]:
            continue
        selected.append(i)
        for j in tree.query_ball_point(cands[i], (1 - COVER_SHRINK) * eta_tilde[i]):
            covered[j] = True
    selected = np.array(selected, int)
    pts, scales, frc = cands[selected], eta_tilde[selected], forced[selected]

    # repair: probe at finer spacing, promote uncovered probes to centers
    for k in range(repair_rounds):
        lat = lateral_factor / 2 ** (k + 1)
        probes = np.concatenate(
            [
                _bulk_grid(domain, r, r / 8, r / 16 + k * r / 64),
                _boundary_bands(domain, bpts, betas, r, np.sqrt(depth_growth), lat),
            ],
            axis=0,
        )
        probe_eta = _interior_eta(domain, probes, r) / 4
        probes, probe_eta = probes[probe_eta > 0], probe_eta[probe_eta > 0]
        miss = _uncovered(probes, pts, scales)
        if not miss.any():
            break
        new_pts, new_eta = probes[miss], probe_eta[miss]
        new_tree = cKDTree(new_pts)
        claimed = np.zeros(len(new_pts), bool)
        add = []
        for i in np.argsort(-new_eta, kind="stable"):
            if claimed[i]:
                continue
            add.append(int(i))
            for j in new_tree.query_ball_point(new_pts[i], (1 - COVER_SHRINK) * new_eta[i]):
                claimed[j] = True
        add = np.array(add, int)
        pts = np.concatenate([pts, new_pts[add]])
        scales = np.concatenate([scales, new_eta[add]])
        frc = np.concatenate([frc, np.zeros(len(add), bool)])
    return InteriorCover(pts, scales, frc, r)


# ---------------------------------------------------------------------------
# graphs


@dataclass
class ConnGraph:
    positions: np.ndarray
    roles: np.ndarray
    scales: np.ndarray
    edges: np.ndarray           # (E, 2) int, i < j
    variant: str
    r: float
    _adj: list = field(default_factory=list, repr=False)

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(
            self.positions[self.edges[:, 0]] - self.positions[self.edges[:, 1]], axis=1
        )

    def neighbors(self, i: int) -> np.ndarray:
        if not self._adj:
            adj = [[] for _ in range(len(self.positions))]
            for a, b in self.edges:
                adj[a].append(int(b))
                adj[b].append(int(a))
            self._adj = [np.array(sorted(x), int) for x in adj]
        return self._adj[i]


def _locally_connectable(domain, a, b, center, radius, resolution):
    """Raster flood-fill proxy for 'a and b joined by a path in
    B_radius(center) ∩ P'."""
    n = max(int(np.ceil(2 * radius / resolution)), 4)
    h = 2 * radius / n
    dim = len(center)
    axes = [np.linspace(c - radius, c + radius, n + 1) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    inside = (domain.sdf(pts) < 0) & (
        np.linalg.norm(pts - center, axis=1) <= radius + h * np.sqrt(dim)
    )
    grid = inside.reshape([n + 1] * dim)
    labels, _ = ndimage.label(grid)  # 4-connectivity: conservative for paths

    def cell_label(x):
        idx = tuple(
            int(np.clip(round((x[k] - (center[k] - radius)) / h), 0, n))
            for k in range(dim)
        )
        lab = labels[idx]
        if lab:
            return lab
        # raster dropout at the seed: take any labelled cell one step away
        for off in np.ndindex(*([3] * dim)):
            nb = tuple(int(np.clip(idx[k] + off[k] - 1, 0, n)) for k in range(dim))
            if labels[nb]:
                return labels[nb]
        return 0

    la, lb = cell_label(a), cell_label(b)
    return la != 0 and la == lb


def build_graph(
    domain: ImplicitDomain,
    boundary_cover: BoundaryCover,
    interior: InteriorCover,
    variant: str = "G0",
) -> ConnGraph:
    """Connectivity graph on Y = interior centers + inner-ball centers y_k +
    boundary centers p_k.

    Edges: scale-ball overlap |v1 - v2| < s1 + s2 among interior/y vertices;
    each p_k joins its own y_k only.  Variant "Simple" drops y-y edges;
    variant "Fl" instead keeps a y-y edge only when the two centers are
    locally connectable inside B_{2 eta_tilde_k}(p_k) (flood fill), and prunes
    y-interior edges by the analogous test inside B_{3 eta_tilde_k}(p_k).
    """
    if variant not in ("G0", "Simple", "Fl"):
        raise ValueError(f"unknown variant {variant}")
    ys = np.array([s.y for s in boundary_cover.samples])
    ps = boundary_cover.centers
    petas = boundary_cover.radii  # cover scale eta_tilde_k, also the y_k ball scale

    positions = np.concatenate([interior.points, ys, ps], axis=0)
    n_int, n_y = len(interior.points), len(ys)
    roles = np.concatenate(
        [
            np.full(n_int, ROLE_INTERIOR),
            np.full(n_y, ROLE_NEAR_BOUNDARY),
            np.full(len(ps), ROLE_BOUNDARY),
        ]
    )
    scales = np.concatenate([interior.eta_tilde, petas, petas])

    active = np.concatenate([interior.points, ys], axis=0)
    act_scales = np.concatenate([interior.eta_tilde, petas])
    tree = cKDTree(active)
    pairs = tree.query_pairs(2 * float(act_scales.max()), output_type="ndarray")
    if len(pairs):
        d = np.linalg.norm(active[pairs[:, 0]] - active[pairs[:, 1]], axis=1)
        pairs = pairs[d < act_scales[pairs[:, 0]] + act_scales[pairs[:, 1]]]

    edges = []
    res_scale = 4.0
    for a, b in pairs:
        a, b = int(a), int(b)
        a_is_y = a >= n_int
        b_is_y = b >= n_int
        if a_is_y and b_is_y:
            if variant == "Simple":
                continue
            if variant == "Fl":
                k = a - n_int
                ok = _locally_connectable(
                    domain, active[a], active[b], ps[k], 2 * petas[k],
                    min(act_scales[a], act_scales[b]) / res_scale,
                )
                if not ok:
                    continue
        elif variant == "Fl" and (a_is_y or b_is_y):
            k = (a if a_is_y else b) - n_int
            ok = _locally_connectable(
                domain, active[a], active[b], ps[k], 3 * petas[k],
                min(act_scales[a], act_scales[b]) / res_scale,
            )
            if not ok:
                continue
        edges.append((a, b))

    for k in range(n_y):
        edges.append((n_int + k, n_int + n_y + k))  # y_k -- p_k

    edges = np.array(sorted(set(map(tuple, edges))), int).reshape(-1, 2)
    return ConnGraph(positions, roles, scales, edges, variant, interior.r)


# ---------------------------------------------------------------------------
# discrete harmonic fields


def laplacian_apply(graph: ConnGraph, u) -> np.ndarray:
    """(L u)(x) = - sum_{y ~ x} (u(y) - u(x)) / |x - y|^2."""
    u = np.asarray(u, float)
    out = np.zeros_like(u)
    w = 1.0 / graph.lengths**2
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    np.add.at(out, i, -(u[j] - u[i]) * w)
    np.add.at(out, j, -(u[i] - u[j]) * w)
    return out


@dataclass
class HarmonicSolution:
    x: int
    u: np.ndarray
    residual_norm: float
    truncation_radius: float


def solve_harmonic(graph: ConnGraph, x: int, tol: float = 1e-10, max_doublings: int = 40) -> HarmonicSolution:
    """Solve (L u)(y) + |y - x| u(y) = delta_x, u = 0 on boundary-role
    vertices, by preconditioned conjugate gradients on truncation balls B_R
    with R doubling from 8r until the solution settles on B_{R/2}."""
    if graph.roles[x] == ROLE_BOUNDARY:
        raise ValueError("source must not be a boundary-role vertex")
    n = len(graph.positions)
    pos = graph.positions
    dist_to_x = np.linalg.norm(pos - pos[x], axis=1)
    pot = dist_to_x

    w = 1.0 / graph.lengths**2
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    W = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n)).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = sparse.diags(deg) - W

    free_all = graph.roles != ROLE_BOUNDARY
    extent = float(dist_to_x.max())
    R = 8 * graph.r
    u_prev = None
    u_full = np.zeros(n)
    residual = np.inf
    for _ in range(max_doublings):
        mask = free_all & (dist_to_x <= R)
        idx = np.flatnonzero(mask)
        A = (L + sparse.diags(pot)).tocsr()[np.ix_(idx, idx)]
        b = np.zeros(len(idx))
        b[np.searchsorted(idx, x)] = 1.0
        dinv = 1.0 / A.diagonal()
        M = sparse.diags(dinv)
        sol, info = cg(A, b, rtol=0.0, atol=tol * 1e-2, M=M, maxiter=100 * len(idx) + 1000)
        if info != 0:
            raise RuntimeError(f"conjugate gradients failed to converge (info={info})")
        u_full = np.zeros(n)
        u_full[idx] = sol
        residual = float(np.linalg.norm(A @ sol - b))
        if u_prev is not None:
            inner = dist_to_x <= R / 2
            if np.max(np.abs(u_full[inner] - u_prev[inner])) < tol:
                break
        if R > 2 * extent:
            break
        u_prev = u_full
        R *= 2
    return HarmonicSolution(x, u_full, residual, R)


def energy_identity(graph: ConnGraph, sol: HarmonicSolution):
    """Returns (sum (du)^2/len^2 + sum |v-x| u(v)^2, u(x)); equal for the
    exact solution by summation by parts."""
    u = sol.u
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    lhs = float(np.sum((u[i] - u[j]) ** 2 / graph.lengths**2))
    dist = np.linalg.norm(graph.positions - graph.positions[sol.x], axis=1)
    lhs += float(np.sum(dist * u**2))
    return lhs, float(u[sol.x])


# ---------------------------------------------------------------------------
# admissible paths and stretch


@dataclass
class PathFamily:
    x: int
    y: int
    paths: list
    w1: np.ndarray              # value-proportional weights
    w2: np.ndarray              # uniform branch weights
    truncated: bool
    residual_mass1: float
    residual_mass2: float


def _ascent_set(graph: ConnGraph, u: np.ndarray, z: int) -> np.ndarray:
    nbrs = graph.neighbors(z)
    return nbrs[u[nbrs] > u[z]]


def harmonic_paths(graph: ConnGraph, sol: HarmonicSolution, y: int, cap: int = 10_000) -> PathFamily:
    """Enumerate the ascent tree from y to the source: O(z) = neighbors with
    larger u; branch weights are value-proportional (w1) and uniform (w2)."""
    u = sol.u
    if u[y] <= 0 and y != sol.x:
        raise ValueError("origin is not in the component of the source")
    paths, w1s, w2s = [], [], []
    truncated = False
    stack = [((y,), 1.0, 1.0)]
    while stack:
        if len(paths) >= cap:
            truncated = True
            break
        path, w1, w2 = stack.pop()
        z = path[-1]
        if z == sol.x:
            paths.append(path)
            w1s.append(w1)
            w2s.append(w2)
            continue
        ascent = _ascent_set(graph, u, z)
        if len(ascent) == 0:
            raise RuntimeError(
                f"ascent stuck at non-source local max {z} (solver failure?)"
            )
        gains = u[ascent] - u[z]
        gains = gains / gains.sum()
        # deterministic order: ties broken by vertex index, explored in order
        for k in np.argsort(ascent)[::-1]:
            stack.append((path + (int(ascent[k]),), w1 * float(gains[k]), w2 / len(ascent)))
    return PathFamily(
        sol.x, y, paths, np.array(w1s), np.array(w2s),
        truncated, 1.0 - float(np.sum(w1s)), 1.0 - float(np.sum(w2s)),
    )


@dataclass
class StretchResult:
    j: int
    S: float | None
    R0: float | None
    d: float
    n_origins: int
    r0_within_dS: bool | None


def _longest_ascent_lengths(graph: ConnGraph, u: np.ndarray, x: int) -> np.ndarray:
    """Sup over admissible (strict-ascent) paths of Euclidean length, per
    start vertex, by dynamic programming in decreasing-u order."""
    n = len(u)
    out = np.full(n, -np.inf)
    out[x] = 0.0
    for z in np.argsort(-u):
        if z == x or u[z] <= 0:
            continue
        asc = _ascent_set(graph, u, z)
        if len(asc) == 0:
            continue
        lens = np.linalg.norm(graph.positions[asc] - graph.positions[z], axis=1)
        vals = lens + out[asc]
        if np.any(np.isfinite(vals)):
            out[z] = np.max(vals)
    return out


def stretch_and_radius(graph: ConnGraph, mesh, j: int, sol: HarmonicSolution | None = None, tol: float = 1e-10) -> StretchResult:
    """Statistical stretch S_j = d_j^{-1} sup path length over origins in the
    second mesoscopic ring of cell j, and the path-radius bound
    R0 = C u(x_j)/min_y u(y) with C the max vertex degree."""
    from .mesostructure import rings

    site = np.asarray(mesh.sites[j], float)
    dists = np.linalg.norm(graph.positions - site, axis=1)
    x = int(np.argmin(dists))
    if dists[x] > 1e-9:
        raise ValueError(f"site {j} is not a graph vertex (nearest at {dists[x]:.3g})")
    if sol is None:
        sol = solve_harmonic(graph, x, tol=tol)
    u = sol.u
    _, fa2, _ = rings(mesh, j, graph.r)
    d_j = float(mesh.diameters[j])

    from shapely import points as shapely_points

    pts = shapely_points(graph.positions)
    in_ring = np.array([fa2.covers(p) for p in pts])
    origins = np.flatnonzero(in_ring & (u > 0) & (np.arange(len(u)) != x))
    if len(origins) == 0:
        return StretchResult(j, None, None, d_j, 0, None)

    longest = _longest_ascent_lengths(graph, u, x)
    finite = origins[np.isfinite(longest[origins])]
    if len(finite) == 0:
        return StretchResult(j, None, None, d_j, 0, None)
    S = float(np.max(longest[finite])) / d_j

    deg = np.zeros(len(u), int)
    for a, b in graph.edges:
        deg[a] += 1
        deg[b] += 1
    C = int(deg.max())
    R0 = float(C * u[x] / np.min(u[finite]))
    return StretchResult(j, S, R0, d_j, len(finite), bool(R0 <= d_j * S))


def poisson_graph_distance(points, connect_radius: float, pairs):
    """Euclidean-weighted graph distances on the ball-overlap graph
    (x ~ y iff |x - y| < connect_radius).  Returns (distances, ratios) per
    requested pair; disconnected pairs get inf and are to be excluded from
    tail statistics."""
    from scipy.sparse.csgraph import dijkstra

    points = np.atleast_2d(np.asarray(points, float))
    pairs = np.atleast_2d(np.asarray(pairs, int))
    tree = cKDTree(points)
    e = tree.query_pairs(connect_radius * (1 - 1e-12), output_type="ndarray")
    n = len(points)
    if len(e) == 0:
        W = sparse.csr_matrix((n, n))
    else:
        lens = np.linalg.norm(points[e[:, 0]] - points[e[:, 1]], axis=1)
        W = sparse.coo_matrix(
            (np.concatenate([lens, lens]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        ).tocsr()
    sources = np.unique(pairs[:, 0])
    D = dijkstra(W, indices=sources)
    lookup = {s: k for k, s in enumerate(sources)}
    dists = np.array([D[lookup[a], b] for a, b in pairs])
    eucl = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    ratios = np.where(np.isfinite(dists) & (eucl > 0), dists / np.maximum(eucl, 1e-300), np.inf)
    return dists, ratios


# ---------------------------------------------------------------------------
# reports

STRETCH_CSV_SCHEMA = "stretch/1"


def write_stretch_csv(results, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# schema={STRETCH_CSV_SCHEMA}"])
        writer.writerow(["site", "d_j", "S_j", "R0", "n_origins", "truncated_paths"])
        for res in results:
            writer.writerow(
                [res.j, f"{res.d:.17g}",
                 "" if res.S is None else f"{res.S:.17g}",
                 "" if res.R0 is None else f"{res.R0:.17g}",
                 res.n_origins, 0]
            )


def dump_graph(graph: ConnGraph) -> str:
    lines = []
    for i, (pos, role, scale) in enumerate(zip(graph.positions, graph.roles, graph.scales)):
        coords = " ".join(f"{v:.17g}" for v in pos)
        lines.append(f"V {i} {role} {coords} {scale:.17g}")
    for (a, b), length in zip(graph.edges, graph.lengths):
        lines.append(f"E {a} {b} {length:.17g}")
    return "\n".join(lines) + "\n"
