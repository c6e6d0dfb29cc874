"""Local boundary regularity of perforated domains.

For a boundary point p we measure the largest scale at which the boundary is a
Lipschitz graph over the tangent plane (the (delta, M) pair), optimize the
extension scale rho = max_r r (4 M_r^2 + 2)^{-1/2}, attach an interior ball,
and assemble a locally finite multiscale cover of the boundary whose scale
field eta_tilde and bulk fields (eta_tilde(x), M_tilde(x)) drive the extension
construction downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Ball, ImplicitDomain, Pipe, rasterize

__all__ = [
    "BoundarySample",
    "BoundaryCover",
    "NOT_A_GRAPH",
    "sample_boundary",
    "boundary_points_of_primitives",
    "local_lipschitz",
    "delta_of",
    "rho_of",
    "rho_from_profile",
    "inner_ball",
    "cover_boundary",
    "adaptive_cover",
    "eta_tilde_field",
    "write_boundary_csv",
]

NOT_A_GRAPH = np.inf
PROJ_TOL = 1e-12
GRAD_STEP = 1e-7
DEFAULT_M_CAP = 1e3
COVER_SHRINK = 1.0 / 8.0  # greedy coverage shrink factor


# ---------------------------------------------------------------------------
# signed-distance calculus helpers


def _grad(domain: ImplicitDomain, x: np.ndarray, h: float = GRAD_STEP) -> np.ndarray:
    """Unit gradient of the signed distance by central differences."""
    x = np.asarray(x, float)
    eye = np.eye(x.size)
    g = (domain.sdf(x + h * eye) - domain.sdf(x - h * eye)) / (2 * h)
    n = np.linalg.norm(g)
    if n == 0:
        raise ValueError(f"vanishing distance gradient at {x}")
    return g / n


def _grad_many(domain: ImplicitDomain, xs: np.ndarray, h: float = GRAD_STEP) -> np.ndarray:
    xs = np.atleast_2d(xs)
    n, d = xs.shape
    g = np.empty((n, d))
    for i in range(d):
        step = np.zeros(d)
        step[i] = h
        g[:, i] = (domain.sdf(xs + step) - domain.sdf(xs - step)) / (2 * h)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return g / norms


def _project(domain: ImplicitDomain, x: np.ndarray, max_iter: int = 40):
    """Newton projection onto the zero level set; None on non-convergence."""
    x = np.asarray(x, float).copy()
    for _ in range(max_iter):
        s = domain.sdf(x)
        if abs(s) < PROJ_TOL:
            return x
        x = x - s * _grad(domain, x)
    return None


def _project_many(domain: ImplicitDomain, xs: np.ndarray, max_iter: int = 25):
    """Vectorized Newton projection; returns (points, converged mask)."""
    xs = np.atleast_2d(np.asarray(xs, float)).copy()
    for _ in range(max_iter):
        s = domain.sdf(xs)
        active = np.abs(s) >= PROJ_TOL
        if not np.any(active):
            break
        g = _grad_many(domain, xs[active])
        xs[active] -= s[active, None] * g
    return xs, np.abs(domain.sdf(xs)) < PROJ_TOL


# ---------------------------------------------------------------------------
# boundary sampling


def sample_boundary(domain: ImplicitDomain, target_spacing: float, max_cells: int = 16_000_000):
    """Quasi-uniform samples of the boundary inside the window.

    Grid cells near the zero level set are projected onto the boundary by
    Newton steps on the signed distance, then thinned to roughly the target
    spacing.  Returns (points, normals, n_dropped).
    """
    if target_spacing <= 0:
        raise ValueError("spacing must be positive")
    grid, axes = rasterize(domain, target_spacing, max_cells=max_cells)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    seeds = pts[np.abs(domain.sdf(pts)) < target_spacing]
    if len(seeds) == 0:
        return np.empty((0, domain.dim)), np.empty((0, domain.dim)), 0

    projected, ok = _project_many(domain, seeds)
    dropped = int(np.sum(~ok))
    projected = projected[ok]
    if len(projected) == 0:
        return np.empty((0, domain.dim)), np.empty((0, domain.dim)), dropped

    # thin clumps produced by adjacent seeds landing on the same spot
    tree = cKDTree(projected)
    keep = np.ones(len(projected), bool)
    for i in range(len(projected)):
        if keep[i]:
            for j in tree.query_ball_point(projected[i], 0.45 * target_spacing):
                if j > i:
                    keep[j] = False
    points = projected[keep]
    return points, _grad_many(domain, points), dropped


def boundary_points_of_primitives(domain: ImplicitDomain, spacing: float) -> np.ndarray:
    """Dense boundary samples by parametrizing each primitive's boundary.

    Every point of the union boundary lies on some primitive's boundary; we
    sample those analytically at the given arc-length spacing and keep the
    points where the union signed distance vanishes (points strictly inside
    another primitive are discarded).  Exact and fast; restricted to ball and
    pipe primitives, window-clipped.  For complements the boundary coincides
    with that of the underlying union.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    chunks = []
    for prim in domain.primitives:
        if isinstance(prim, Ball):
            c = np.asarray(prim.center)
            if c.size == 2:
                n = max(int(np.ceil(2 * np.pi * prim.radius / spacing)), 8)
                th = 2 * np.pi * np.arange(n) / n
                chunks.append(c + prim.radius * np.stack([np.cos(th), np.sin(th)], axis=1))
            else:
                n = max(int(np.ceil(4 * np.pi * prim.radius**2 / spacing**2)), 16)
                # Fibonacci sphere lattice
                i = np.arange(n) + 0.5
                phi = np.arccos(1 - 2 * i / n)
                th = np.pi * (1 + np.sqrt(5)) * i
                dirs = np.stack(
                    [np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1
                )
                chunks.append(c + prim.radius * dirs)
        elif isinstance(prim, Pipe):
            a = np.asarray(prim.a)
            b = np.asarray(prim.b)
            if a.size != 2:
                raise ValueError("pipe boundary sampling implemented for 2D only")
            u = (b - a) / np.linalg.norm(b - a)
            perp = np.array([-u[1], u[0]])
            length = np.linalg.norm(b - a)
            nl = max(int(np.ceil(length / spacing)), 2)
            t = np.linspace(0, length, nl + 1)
            for side in (1.0, -1.0):
                chunks.append(a + t[:, None] * u + side * prim.radius * perp)
            nc = max(int(np.ceil(2 * prim.radius / spacing)), 2)
            s = np.linspace(-prim.radius, prim.radius, nc + 1)
            chunks.append(a + s[:, None] * perp)
            chunks.append(b + s[:, None] * perp)
        else:
            raise ValueError("primitive boundary sampling supports balls and pipes")
    if not chunks:
        return np.empty((0, domain.dim))
    pts = np.concatenate(chunks, axis=0)
    on_boundary = np.abs(domain.sdf(pts)) < 1e-9
    pts = pts[on_boundary & domain.window.contains(pts)]
    return pts


# ---------------------------------------------------------------------------
# local Lipschitz estimation


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def _march_boundary_2d(domain, p, delta, spacing, max_steps=20_000):
    """Trace the boundary curve through p by predictor/corrector marching,
    both directions, until it leaves the delta ball around p."""
    pts = [np.asarray(p, float)]
    for sign in (1.0, -1.0):
        x = np.asarray(p, float)
        t = sign * _perp(_grad(domain, x))
        for _ in range(max_steps):
            q = _project(domain, x + spacing * t)
            if q is None or np.linalg.norm(q - p) > delta:
                break
            if np.linalg.norm(q - x) < 0.05 * spacing:
                break  # stalled (e.g. sharp corner); stop this branch
            pts.append(q)
            t_new = _perp(_grad(domain, q))
            if np.dot(t_new, q - x) < 0:
                t_new = -t_new
            x, t = q, t_new
    return np.asarray(pts)


def _scatter_boundary_local(domain, p, delta, spacing):
    """Grid-seeded boundary samples inside the delta ball (vectorized)."""
    p = np.asarray(p, float)
    d = p.size
    n = max(int(np.ceil(2 * delta / spacing)), 2)
    axes = [np.linspace(-delta, delta, n + 1)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    seeds = p + np.stack([g.ravel() for g in mesh], axis=1)
    seeds = seeds[np.abs(domain.sdf(seeds)) < spacing]
    if len(seeds) == 0:
        return p[None, :]
    proj, ok = _project_many(domain, seeds)
    proj = proj[ok]
    proj = proj[np.linalg.norm(proj - p, axis=1) <= delta]
    return np.concatenate([p[None, :], proj], axis=0)


def _single_ball(domain: ImplicitDomain):
    if len(domain.primitives) == 1 and isinstance(domain.primitives[0], Ball):
        return domain.primitives[0]
    return None


def local_lipschitz(
    domain: ImplicitDomain,
    p,
    delta: float,
    axis=None,
    spacing: float | None = None,
    m_cap: float = DEFAULT_M_CAP,
    method: str = "march",
) -> float:
    """Least Lipschitz constant of the boundary patch in B_delta(p) as a graph
    over the plane orthogonal to ``axis`` (default: boundary normal at p).

    Returns ``NOT_A_GRAPH`` (= inf) when the patch fails single-valuedness
    over the base plane.  For a domain that is a single ball and the radial
    axis the value is analytic: the cap within chord distance delta subtends
    the angle 2 asin(delta/2R) and the extreme slope is its tangent.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = np.asarray(p, float)
    if abs(domain.sdf(p)) > 1e-8:
        raise ValueError("p must lie on the boundary")
    if axis is None:
        axis = _grad(domain, p)
    else:
        axis = np.asarray(axis, float)
        axis = axis / np.linalg.norm(axis)

    ball = _single_ball(domain)
    if ball is not None:
        radial = p - np.asarray(ball.center)
        radial /= np.linalg.norm(radial)
        if abs(np.dot(radial, axis)) > 1 - 1e-9:
            half_chord = delta / (2 * ball.radius)
            if half_chord >= np.sin(np.pi / 4):
                return NOT_A_GRAPH  # cap reaches past the equator of the chart
            return float(np.tan(2 * np.arcsin(half_chord)))

    if spacing is None:
        spacing = delta / 48
    if domain.dim == 2 and method == "march":
        pts = _march_boundary_2d(domain, p, delta, spacing)
    else:
        pts = _scatter_boundary_local(domain, p, delta, spacing)
    if len(pts) < 2:
        return 0.0

    rel = pts - p
    w = rel @ axis
    base = rel - np.outer(w, axis)
    tcoord = (base @ _perp(axis))[:, None] if domain.dim == 2 else base

    # single-valuedness audit over base-plane bins
    bin_width = spacing / 2
    bins = {}
    for i in range(len(pts)):
        key = tuple(np.floor(tcoord[i] / bin_width).astype(int))
        lo, hi = bins.get(key, (np.inf, -np.inf))
        bins[key] = (min(lo, w[i]), max(hi, w[i]))
    for lo, hi in bins.values():
        if hi - lo > m_cap * bin_width:
            return NOT_A_GRAPH

    dw = np.abs(w[:, None] - w[None, :])
    dt = np.linalg.norm(tcoord[:, None, :] - tcoord[None, :, :], axis=-1)
    mask = dt > bin_width / 4
    if not np.any(mask):
        return 0.0
    m = float(np.max(dw[mask] / dt[mask]))
    return NOT_A_GRAPH if m > m_cap else m


def delta_of(
    domain: ImplicitDomain,
    p,
    cap: float,
    m_cap: float = DEFAULT_M_CAP,
    axis=None,
    rel_tol: float = 1e-3,
    spacing_frac: float = 1 / 48,
    method: str = "march",
) -> float:
    """Half the largest scale Delta <= cap at which the boundary patch is a
    graph with Lipschitz constant <= m_cap; returns half the floor scale
    (flag condition) when no scale qualifies."""
    if cap <= 0:
        raise ValueError("cap must be positive")

    def ok(scale):
        m = local_lipschitz(
            domain, p, scale, axis=axis, spacing=scale * spacing_frac, m_cap=m_cap, method=method
        )
        return bool(np.isfinite(m))

    if ok(cap):
        return cap / 2
    floor = cap * 1e-3
    if not ok(floor):
        return floor / 2
    lo, hi = floor, cap
    while hi / lo > 1 + rel_tol:
        mid = float(np.sqrt(lo * hi))
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo / 2


def rho_from_profile(rs, ms):
    """Optimize r (4 M_r^2 + 2)^{-1/2} over sampled scales.

    Returns (rho, rho_hat): the maximum and the smallest maximizing scale.
    Non-graph scales (infinite M) are skipped.
    """
    rs = np.asarray(rs, float)
    ms = np.asarray(ms, float)
    finite = np.isfinite(ms)
    if not np.any(finite):
        raise ValueError("no graph scale available")
    vals = np.where(finite, rs / np.sqrt(4 * ms**2 + 2), -np.inf)
    rho = float(np.max(vals))
    return rho, float(np.min(rs[vals >= rho * (1 - 1e-9)]))


def rho_of(
    domain: ImplicitDomain,
    p,
    delta: float,
    axis=None,
    n_scales: int = 32,
    m_cap: float = DEFAULT_M_CAP,
    points_per_scale: int = 24,
    method: str = "march",
):
    """(rho(p), rho_hat(p)) from the optimized profile on a log grid in (0, delta]."""
    rs = np.geomspace(delta * 1e-2, delta, n_scales)
    ms = [
        local_lipschitz(
            domain, p, r, axis=axis, spacing=r / points_per_scale, m_cap=m_cap, method=method
        )
        for r in rs
    ]
    return rho_from_profile(rs, ms)


def inner_ball(domain: ImplicitDomain, p, delta: float, m: float, normal, floor_frac: float = 1 / 64):
    """Interior ball attached to p: center at depth delta/4 on the inward
    normal ray, radius delta/(4(1+M)), verified against the signed distance.

    If the nominal placement fails, the depth is line-searched in
    [delta/8, delta/2] and the radius shrunk geometrically; returns
    (y, r_inner, flagged) with flagged set when r_inner fell below
    floor_frac * delta."""
    p = np.asarray(p, float)
    normal = np.asarray(normal, float)
    normal = normal / np.linalg.norm(normal)
    r_target = delta / (4 * (1 + m))

    y = p - (delta / 4) * normal
    if domain.sdf(y) <= -r_target * (1 - 1e-9):
        return y, r_target, False

    depths = np.linspace(delta / 8, delta / 2, 17)
    cands = p - depths[:, None] * normal
    sd = domain.sdf(cands)
    best = int(np.argmin(sd))
    y = cands[best]
    avail = -float(sd[best])
    if avail >= r_target * (1 - 1e-9):
        return y, r_target, False
    r = r_target
    while r > avail and r > floor_frac * delta:
        r *= 0.8
    r = max(min(r, avail), 0.0)
    return y, r, r < floor_frac * delta


# ---------------------------------------------------------------------------
# multiscale boundary cover


@dataclass
class BoundarySample:
    """Cover center with its regularity data and interior ball."""

    p: np.ndarray
    normal: np.ndarray
    delta: float
    m: float
    rho: float
    rho_hat: float
    eta: float          # Lipschitz-regularized base scale (rho_hat based)
    eta_tilde: float    # cover-ball radius 2^{-K} * eta
    y: np.ndarray       # interior ball center
    r_inner: float


@dataclass
class BoundaryCover:
    samples: list
    K: int
    all_points: np.ndarray
    all_eta_tilde: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return np.array([s.p for s in self.samples])

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.eta_tilde for s in self.samples])

    def covering_index(self, points) -> np.ndarray:
        """Index of a covering center for each point, -1 if uncovered."""
        points = np.atleast_2d(np.asarray(points, float))
        centers = self.centers
        radii = self.radii
        tree = cKDTree(centers)
        rmax = float(radii.max())
        out = np.full(len(points), -1, int)
        neighborhoods = tree.query_ball_point(points, rmax)
        for i, idx in enumerate(neighborhoods):
            for j in idx:
                if np.linalg.norm(points[i] - centers[j]) <= radii[j]:
                    out[i] = j
                    break
        return out

    def intersecting_pairs(self) -> np.ndarray:
        """Pairs (i, j) of cover balls with nonempty intersection."""
        centers = self.centers
        radii = self.radii
        tree = cKDTree(centers)
        pairs = tree.query_pairs(2 * float(radii.max()), output_type="ndarray")
        if len(pairs) == 0:
            return pairs.reshape(0, 2)
        d = np.linalg.norm(centers[pairs[:, 0]] - centers[pairs[:, 1]], axis=1)
        return pairs[d < radii[pairs[:, 0]] + radii[pairs[:, 1]]]


def cover_boundary(
    domain: ImplicitDomain,
    points,
    normals=None,
    K: int = 5,
    r_cap: float = 1.0,
    m_cap: float = DEFAULT_M_CAP,
    n_scales: int = 32,
    points_per_scale: int = 16,
    profile_points=None,
    method: str = "march",
) -> BoundaryCover:
    """Locally finite multiscale cover of the boundary.

    The regularity profile (delta, M, rho, rho_hat) is computed at
    ``profile_points`` (default: all of ``points``); the base scale
    eta = rho_hat is extended to all candidate points as the 1-Lipschitz
    lower envelope max_j (rho_hat_j - |p - q_j|) and shrunk to
    eta_tilde = eta / 2^K.  Centers are
    then chosen greedily by descending eta_tilde, each claiming the
    (1 - 1/8)-shrunk ball around itself.  This yields completeness over the
    candidates and, for intersecting cover balls, the structural pair bounds
    eta_tilde ratio >= (2^K - 1)/(2^K + 1) and |p_i - p_k| >= (7/8) max.
    """
    points = np.atleast_2d(np.asarray(points, float))
    if len(points) == 0:
        raise ValueError("no boundary samples")
    if profile_points is None:
        profile_points = points
    else:
        profile_points = np.atleast_2d(np.asarray(profile_points, float))

    n_prof = len(profile_points)
    deltas = np.empty(n_prof)
    ms = np.empty(n_prof)
    rhos = np.empty(n_prof)
    rhohats = np.empty(n_prof)
    for i, p in enumerate(profile_points):
        deltas[i] = delta_of(
            domain, p, cap=r_cap / 4, m_cap=m_cap, spacing_frac=1 / points_per_scale, method=method
        )
        mi = local_lipschitz(
            domain, p, deltas[i], spacing=deltas[i] / points_per_scale, m_cap=m_cap, method=method
        )
        ms[i] = mi if np.isfinite(mi) else m_cap
        rhos[i], rhohats[i] = rho_of(
            domain,
            p,
            deltas[i],
            n_scales=n_scales,
            m_cap=m_cap,
            points_per_scale=points_per_scale,
            method=method,
        )

    # 1-Lipschitz base scale at every candidate: the sup-convolution lower
    # envelope of the profiled rho_hat values (conservative: never exceeds a
    # Lipschitz-continuous true scale field)
    eta = np.empty(len(points))
    chunk = 8192
    for lo in range(0, len(points), chunk):
        d = np.linalg.norm(points[lo : lo + chunk, None, :] - profile_points[None, :, :], axis=-1)
        eta[lo : lo + chunk] = np.max(rhohats[None, :] - d, axis=1)
    if np.min(eta) <= 0:
        raise ValueError("profile points too sparse: scale envelope vanished between them")
    eta_tilde = eta / 2**K

    # candidate density precondition: a point between two candidates is only
    # guaranteed a cover ball if candidates are eta_tilde/4-dense
    tree = cKDTree(points)
    if len(points) > 1:
        nn = tree.query(points, k=2)[0][:, 1]
        bad = np.flatnonzero(nn > eta_tilde / 4)
        if len(bad):
            raise ValueError(
                f"sample set too sparse near {points[bad[0]]}: "
                f"spacing {nn[bad[0]]:.3g} exceeds eta_tilde/4 = {eta_tilde[bad[0]] / 4:.3g}"
            )

    # greedy selection by descending scale with shrunken claimed balls
    order = np.lexsort((np.arange(len(points)), -eta_tilde))
    covered = np.zeros(len(points), bool)
    selected = []
    for i in order:
        if covered[i]:
            continue
        selected.append(i)
        for j in tree.query_ball_point(points[i], (1 - COVER_SHRINK) * eta_tilde[i]):
            covered[j] = True

    prof_tree = cKDTree(profile_points)
    _, nearest_prof = prof_tree.query(points[selected])
    if normals is None:
        sel_normals = _grad_many(domain, points[selected])
    else:
        sel_normals = np.atleast_2d(np.asarray(normals, float))[selected]

    samples = []
    for k, i in enumerate(selected):
        j = nearest_prof[k] if np.ndim(nearest_prof) else int(nearest_prof)
        y, r_in, _ = inner_ball(domain, points[i], eta_tilde[i] / 4, ms[j], sel_normals[k])
        samples.append(
            BoundarySample(
                p=points[i],
                normal=sel_normals[k],
                delta=deltas[j],
                m=ms[j],
                rho=rhos[j],
                rho_hat=rhohats[j],
                eta=eta[i],
                eta_tilde=eta_tilde[i],
                y=y,
                r_inner=r_in,
            )
        )
    cover = BoundaryCover(samples, K, points, eta_tilde)

    missed = np.flatnonzero(cover.covering_index(points) < 0)
    if len(missed):
        raise ValueError(f"sample {points[missed[0]]} not covered; sample set too sparse")
    return cover


def adaptive_cover(
    domain: ImplicitDomain,
    profile_spacing: float,
    r_cap: float = 1.0,
    K: int = 5,
    m_cap: float = DEFAULT_M_CAP,
    n_scales: int = 8,
    points_per_scale: int = 8,
    max_candidates: int = 400_000,
    method: str = "scatter",
) -> BoundaryCover:
    """Two-pass boundary cover for a realization.

    Pass one profiles the regularity fields at ``profile_spacing`` resolution
    along the primitive boundaries; the smallest profiled rho_hat fixes the
    candidate density (eta_tilde/4, the completeness precondition of
    cover_boundary) for the dense second pass.
    """
    profile = boundary_points_of_primitives(domain, profile_spacing)
    if len(profile) == 0:
        raise ValueError("domain has no boundary in the window")

    def profile_rhohat(p):
        delta = delta_of(
            domain, p, cap=r_cap / 4, m_cap=m_cap, spacing_frac=1 / points_per_scale, method=method
        )
        return rho_of(
            domain, p, delta, n_scales=n_scales, m_cap=m_cap,
            points_per_scale=points_per_scale, method=method,
        )[1]

    profile = list(profile)
    rhohats = [profile_rhohat(p) for p in profile]

    # refine the profile where the Lipschitz lower envelope of rho_hat dips
    # (cusp junctions between primitives leave gaps wider than the local scale)
    probe_spacing = profile_spacing / 8
    probes = boundary_points_of_primitives(domain, probe_spacing)
    envelope_min = -np.inf
    for _ in range(6):
        parr = np.asarray(profile)
        rarr = np.asarray(rhohats)
        env = np.empty(len(probes))
        for lo in range(0, len(probes), 8192):
            d = np.linalg.norm(probes[lo : lo + 8192, None, :] - parr[None, :, :], axis=-1)
            env[lo : lo + 8192] = np.max(rarr[None, :] - d, axis=1)
        envelope_min = float(env.min()) - probe_spacing
        if envelope_min > 0:
            break
        worst = np.argsort(env)[:40]
        for i in worst:
            profile.append(probes[i])
            rhohats.append(profile_rhohat(probes[i]))
    if envelope_min <= 0:
        raise ValueError(
            f"profile_spacing {profile_spacing:.3g} too coarse: scale envelope not positive"
        )
    profile = np.asarray(profile)
    spacing = 0.45 * (envelope_min / 2**K) / 4
    est = sum(
        2 * np.pi * p.radius if isinstance(p, Ball)
        else 2 * np.linalg.norm(np.subtract(p.b, p.a)) + 4 * p.radius
        for p in domain.primitives
    ) / spacing
    if est > max_candidates:
        raise ValueError(f"~{est:.0f} candidates needed, exceeds cap {max_candidates}")
    dense = boundary_points_of_primitives(domain, spacing)
    return cover_boundary(
        domain, dense, K=K, r_cap=r_cap, m_cap=m_cap, n_scales=n_scales,
        points_per_scale=points_per_scale, profile_points=profile, method=method,
    )


def eta_tilde_field(cover: BoundaryCover, xs):
    """Bulk fields (eta_tilde(x), M_tilde(x)).

    eta_tilde(x) is the minimum cover scale whose eighth-ball contains x
    (0 if none); M_tilde(x) the maximum of M+1 over the closed eighth-balls
    containing x (0 if none).
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    centers = cover.centers
    radii = cover.radii / 8
    mvals = np.array([s.m for s in cover.samples])
    scales = cover.radii
    tree = cKDTree(centers)
    rmax = float(radii.max())
    eta_out = np.zeros(len(xs))
    m_out = np.zeros(len(xs))
    neighborhoods = tree.query_ball_point(xs, rmax * (1 + 1e-12))
    for i, idx in enumerate(neighborhoods):
        if not idx:
            continue
        idx = np.asarray(idx)
        d = np.linalg.norm(centers[idx] - xs[i], axis=1)
        inside = idx[d < radii[idx]]
        closed = idx[d <= radii[idx] * (1 + 1e-12)]
        if len(inside):
            eta_out[i] = scales[inside].min()
        if len(closed):
            m_out[i] = (mvals[closed] + 1).max()
    return eta_out, m_out


# ---------------------------------------------------------------------------
# report output

BOUNDARY_CSV_SCHEMA = "boundary_regularity/1"


def boundary_csv_columns(dim: int):
    tags = ["x", "y", "z"][:dim]
    cols = [f"p_{t}" for t in tags] + [f"n_{t}" for t in tags]
    cols += ["delta", "M", "rho", "rho_hat"]
    cols += [f"y_{t}" for t in tags] + ["r_inner"]
    return cols


def write_boundary_csv(cover: BoundaryCover, path):
    dim = cover.centers.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# schema={BOUNDARY_CSV_SCHEMA}"])
        writer.writerow(boundary_csv_columns(dim))
        for s in cover.samples:
            row = [*s.p, *s.normal, s.delta, s.m, s.rho, s.rho_hat, *s.y, s.r_inner]
            writer.writerow([f"{v:.17g}" for v in row])
