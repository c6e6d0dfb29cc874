"""Extension and trace operators for perforated domains.

Local extension by the two-point reflection across a Lipschitz boundary
chart, a micro partition of unity subordinate to a boundary cover, the glued
local operator on a box Q, the global operator that additionally fills deep
voids with mesoscopic cell averages, trace sampling, scaled Poincare
constants, a semi-analytic baseline for periodic geometries, and the
epsilon-scaling experiment measuring uniformity of the operator norms.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Ball, ImplicitDomain, Pipe, Window, generate, lattice_points_Xr
from .mesostructure import phi_cutoff, voronoi
from .regularity import (
    BoundaryCover,
    adaptive_cover,
    boundary_points_of_primitives,
    _grad_many,
)

__all__ = [
    "GridFunction",
    "Chart",
    "ExtensionReport",
    "TraceResult",
    "extract_chart",
    "local_extend",
    "micro_partition",
    "glue_local",
    "glue_global",
    "trace_sample",
    "poincare_constant",
    "periodic_baseline",
    "scaling_experiment",
    "scale_domain",
    "write_extension_report_csv",
]


# ---------------------------------------------------------------------------
# sampled fields


@dataclass
class GridFunction:
    """Node values on a regular grid, nan outside the declared support,
    multilinear interpolation in between."""

    lo: np.ndarray
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, float)
        self.values = np.asarray(self.values, float)
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")

    @property
    def dim(self) -> int:
        return self.values.ndim

    def axes(self):
        return [
            self.lo[k] + self.h * np.arange(self.values.shape[k])
            for k in range(self.dim)
        ]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @classmethod
    def from_callable(cls, lo, hi, h, fn, support=None) -> "GridFunction":
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        axes = [np.arange(a, b + h / 2, h) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.asarray(fn(pts), float)
        if support is not None:
            vals = np.where(support(pts), vals, np.nan)
        return cls(lo, h, vals.reshape([len(a) for a in axes]))

    def interp(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, float))
        rel = (xs - self.lo) / self.h
        shape = np.array(self.values.shape)
        i0 = np.floor(rel).astype(int)
        i0 = np.clip(i0, 0, shape - 2)
        frac = rel - i0
        inside = np.all((rel >= -1e-9) & (rel <= shape - 1 + 1e-9), axis=1)
        out = np.zeros(len(xs))
        for off in np.ndindex(*([2] * self.dim)):
            w = np.ones(len(xs))
            idx = []
            for k in range(self.dim):
                w = w * (frac[:, k] if off[k] else 1 - frac[:, k])
                idx.append(i0[:, k] + off[k])
            out = out + w * self.values[tuple(idx)]
        return np.where(inside, out, np.nan)

    def interp_support(self, xs) -> np.ndarray:
        """Multilinear interpolation with the weights renormalized over the
        finite stencil corners, so points within one cell of the support edge
        still evaluate (first-order accurate there)."""
        xs = np.atleast_2d(np.asarray(xs, float))
        rel = (xs - self.lo) / self.h
        shape = np.array(self.values.shape)
        i0 = np.clip(np.floor(rel).astype(int), 0, shape - 2)
        frac = rel - i0
        inside = np.all((rel >= -1e-9) & (rel <= shape - 1 + 1e-9), axis=1)
        num = np.zeros(len(xs))
        den = np.zeros(len(xs))
        any_fin = np.zeros(len(xs), bool)
        nearest = np.full(len(xs), np.nan)
        best_w = np.full(len(xs), -1.0)
        for off in np.ndindex(*([2] * self.dim)):
            w = np.ones(len(xs))
            idx = []
            for k in range(self.dim):
                w = w * (frac[:, k] if off[k] else 1 - frac[:, k])
                idx.append(i0[:, k] + off[k])
            v = self.values[tuple(idx)]
            good = np.isfinite(v)
            num += np.where(good, w * v, 0.0)
            den += np.where(good, w, 0.0)
            any_fin |= good
            upd = good & (w > best_w)
            nearest = np.where(upd, v, nearest)
            best_w = np.where(upd, w, best_w)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(den > 1e-12, num / den, nearest)
        return np.where(inside & any_fin, out, np.nan)

    def gradient(self):
        return np.gradient(self.values, self.h, edge_order=1)

    def lp_norm(self, p: float, mask=None) -> float:
        v = self.values
        m = np.isfinite(v) if mask is None else (mask & np.isfinite(v))
        return float(np.sum(np.abs(v[m]) ** p) * self.h**self.dim) ** (1 / p)

    def grad_lp_norm(self, p: float, mask=None) -> float:
        grads = self.gradient()
        mag = np.sqrt(sum(g**2 for g in grads))
        m = np.isfinite(mag) if mask is None else (mask & np.isfinite(mag))
        return float(np.sum(mag[m] ** p) * self.h**self.dim) ** (1 / p)


# ---------------------------------------------------------------------------
# boundary charts and the reflection operator


@dataclass
class Chart:
    """A boundary patch written as the graph of a Lipschitz height function
    over the tangent plane at p (normal pointing out of P, graph height
    measured along the normal; the domain lies below the graph)."""

    p: np.ndarray
    normal: np.ndarray
    tangents: np.ndarray        # (d-1, d)
    delta: float
    lipschitz: float
    phi: GridFunction           # height over base coordinates

    @property
    def rho(self) -> float:
        return self.delta / np.sqrt(4 * self.lipschitz**2 + 2)

    def to_chart(self, xs):
        xs = np.atleast_2d(np.asarray(xs, float)) - self.p
        return xs @ self.tangents.T, xs @ self.normal

    def to_world(self, ts, ss):
        ts = np.atleast_2d(ts)
        return self.p + ts @ self.tangents + np.outer(ss, self.normal)


def _tangent_frame(normal: np.ndarray) -> np.ndarray:
    d = len(normal)
    if d == 2:
        return np.array([[-normal[1], normal[0]]])
    a = np.zeros(d)
    a[int(np.argmin(np.abs(normal)))] = 1.0
    t1 = np.cross(normal, a)
    t1 /= np.linalg.norm(t1)
    return np.stack([t1, np.cross(normal, t1)])


def extract_chart(domain: ImplicitDomain, sample, delta=None, n_base: int = 33) -> Chart:
    """Chart at a boundary sample: height function found by bisection of the
    signed distance along normal rays over a base grid."""
    p = np.asarray(sample.p, float)
    normal = np.asarray(sample.normal, float)
    delta = float(sample.delta if delta is None else delta)
    m = float(sample.m)
    if not np.isfinite(delta) or not np.isfinite(m):
        raise ValueError("chart requires finite delta and Lipschitz bound")
    tangents = _tangent_frame(normal)
    d = len(p)
    axes = [np.linspace(-delta, delta, n_base)] * (d - 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    ts = np.stack([g.ravel() for g in mesh], axis=1)

    smax = m * delta * np.sqrt(d - 1) + delta / 4
    nray = 65
    svals = np.linspace(-smax, smax, nray)
    base = p + ts @ tangents                                  # (nb, d)
    rays = base[:, None, :] + svals[None, :, None] * normal   # (nb, nray, d)
    f = domain.sdf(rays.reshape(-1, d)).reshape(len(ts), nray)
    change = (f[:, :-1] > 0) != (f[:, 1:] > 0)
    in_ball = (
        np.linalg.norm(ts, axis=1)[:, None] ** 2 + svals[None, :-1] ** 2 < delta**2
    )
    if np.any((change & in_ball).sum(axis=1) > 1):
        raise ValueError("boundary is multi-valued over the chart base")
    heights = np.full(len(ts), np.nan)
    has = change.any(axis=1)
    # prefer the crossing inside the chart ball, else the one nearest the base
    pick = np.where((change & in_ball).any(axis=1)[:, None], change & in_ball, change)
    cand = np.where(pick, np.abs(svals[:-1])[None, :], np.inf)
    k = np.argmin(cand, axis=1)
    a = svals[k]
    b = svals[k + 1]
    fa = f[np.arange(len(ts)), k]
    for _ in range(52):
        mid = (a + b) / 2
        fm = domain.sdf(base + mid[:, None] * normal)
        same = (fm > 0) == (fa > 0)
        a = np.where(same, mid, a)
        fa = np.where(same, fm, fa)
        b = np.where(same, b, mid)
    heights[has] = ((a + b) / 2)[has]
    hb = 2 * delta / (n_base - 1)
    phi = GridFunction(np.full(d - 1, -delta), hb, heights.reshape([n_base] * (d - 1)))
    return Chart(p, normal, tangents, delta, m, phi)


def build_charts(domain: ImplicitDomain, cover: BoundaryCover, n_base: int = 17):
    """One chart per cover ball, sized to the gluing neighborhood."""
    return [
        extract_chart(domain, s, delta=4 * cover.radii[k], n_base=n_base)
        for k, s in enumerate(cover.samples)
    ]


def local_extend(chart: Chart, u: GridFunction, xs) -> np.ndarray:
    """Reflection extension: above the graph,
    Uu(t, s) = 4 u(t, -s/2 + (3/2) phi(t)) - 3 u(t, -s + 2 phi(t));
    the identity below."""
    xs = np.atleast_2d(np.asarray(xs, float))
    ts, ss = chart.to_chart(xs)
    phi = chart.phi.interp(ts)
    if np.any(~np.isfinite(phi)):
        raise ValueError("point outside the chart base")
    above = ss > phi
    r1 = chart.to_world(ts, -ss / 2 + 1.5 * phi)
    r2 = chart.to_world(ts, -ss + 2 * phi)
    v_above = 4 * u.interp_support(r1) - 3 * u.interp_support(r2)
    v_below = u.interp_support(xs)
    out = np.where(above, v_above, v_below)
    if np.any(~np.isfinite(out)):
        raise ValueError("reflected point outside the sampled support")
    return out


# ---------------------------------------------------------------------------
# micro partition of unity


def _bump(xi: np.ndarray) -> np.ndarray:
    """C^1 bump on [0, 1), zero outside."""
    xi = np.clip(xi, 0.0, 1.0)
    return (1 - xi**2) ** 2


class MicroPartition:
    """phi_0 plus one bump phi_k per boundary cover ball, normalized to a
    partition of unity.  phi_k lives on B_{rho_tilde_k}(p_k) and is damped to
    zero on the other inner balls; phi_0 vanishes on the boundary and on all
    inner balls."""

    def __init__(self, domain: ImplicitDomain, cover: BoundaryCover):
        self.domain = domain
        self.cover = cover
        self.centers = cover.centers
        self.radii = cover.radii
        self.ys = np.array([s.y for s in cover.samples])
        self.rks = np.array([max(s.r_inner, 1e-300) for s in cover.samples])
        self._ctree = cKDTree(self.centers)
        self._ytree = cKDTree(self.ys)
        self._rmax = float(self.radii.max())
        self._rkmax = float(self.rks.max())

    def raw_terms(self, xs):
        """Returns (phi0_tilde, terms) with terms a list of
        (k, node_indices, phi_tilde_values)."""
        xs = np.atleast_2d(np.asarray(xs, float))
        sd = self.domain.sdf(xs)
        gap = np.full(len(xs), np.inf)
        for i, idx in enumerate(self._ytree.query_ball_point(xs, 2 * self._rkmax + self._rmax)):
            for j in idx:
                gap[i] = min(gap[i], np.linalg.norm(xs[i] - self.ys[j]) - self.rks[j])
        phi0 = np.minimum(np.abs(sd), np.maximum(gap, 0.0))

        # per-ball damping factor against foreign inner balls
        terms = []
        by_k = {}
        for i, idx in enumerate(self._ctree.query_ball_point(xs, self._rmax)):
            for k in idx:
                if np.linalg.norm(xs[i] - self.centers[k]) < self.radii[k]:
                    by_k.setdefault(k, []).append(i)
        for k, rows in sorted(by_k.items()):
            rows = np.array(rows, int)
            pts = xs[rows]
            vals = _bump(np.linalg.norm(pts - self.centers[k], axis=1) / self.radii[k])
            for j in self._ytree.query_ball_point(self.centers[k], self.radii[k] + 2 * self._rkmax):
                if j == k:
                    continue
                g = np.linalg.norm(pts - self.ys[j], axis=1) - self.rks[j]
                vals = vals * np.clip(g / self.rks[j], 0.0, 1.0)
            terms.append((k, rows, vals))
        return phi0, terms


def micro_partition(domain: ImplicitDomain, cover: BoundaryCover) -> MicroPartition:
    return MicroPartition(domain, cover)


# ---------------------------------------------------------------------------
# glued operators


def _tau(u: GridFunction, center, radius) -> float:
    """Mean of u over a ball: grid quadrature, falling back to the center
    value when the grid cannot resolve the ball."""
    nodes = u.nodes()
    vals = u.values.ravel()
    dist = np.linalg.norm(nodes - center, axis=1)
    fin = np.isfinite(vals)
    m = (dist <= radius) & fin
    if m.sum():
        return float(vals[m].mean())
    # the grid cannot resolve the ball: nearest sampled value stands in
    v = float(u.interp_support(np.asarray(center)[None])[0])
    if np.isfinite(v):
        return v
    if not fin.any():
        raise ValueError("inner ball lies outside the sampled support")
    j = int(np.argmin(np.where(fin, dist, np.inf)))
    if dist[j] > 2.5 * u.h * np.sqrt(u.dim):
        raise ValueError("inner ball lies outside the sampled support")
    return float(vals[j])


def _out_grid(Q: Window, h: float):
    axes = [np.arange(lo, hi + h / 2, h) for lo, hi in zip(Q.lo, Q.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return axes, pts


def glue_local(domain: ImplicitDomain, cover: BoundaryCover, u: GridFunction, Q: Window,
               charts=None):
    """Glued local extension U_Q u = sum_k phi_k (U_k(u - tau_k u) + tau_k u)
    on the nodes of Q outside P.  Deep-void nodes reached by no cover ball get
    value 0 and a hole flag."""
    charts = build_charts(domain, cover) if charts is None else charts
    part = micro_partition(domain, cover)
    axes, pts = _out_grid(Q, u.h)
    shape = [len(a) for a in axes]
    sd = domain.sdf(pts)
    outside = sd >= 0

    _, terms = part.raw_terms(pts)
    num = np.zeros(len(pts))
    ksum = np.zeros(len(pts))
    for k, rows, vals in terms:
        sample = cover.samples[k]
        tau = _tau(u, sample.y, sample.r_inner)
        need = rows[outside[rows]]
        if len(need) == 0:
            continue
        shifted = dataclasses.replace(u, values=u.values - tau)
        ext = np.zeros(len(pts))
        ext[need] = local_extend(charts[k], shifted, pts[need]) + tau
        m = np.isin(rows, need)
        num[rows[m]] += vals[m] * ext[rows[m]]
        ksum[rows[m]] += vals[m]

    # outside P only the boundary bumps carry local information, so the
    # covered zone is normalized over them; uncovered void nodes are holes
    holes = outside & (ksum <= 0)
    out = np.where(outside & ~holes, num / np.where(ksum > 0, ksum, 1.0), 0.0)
    gf = GridFunction(np.asarray(Q.lo, float), u.h,
                      np.where(outside, out, np.nan).reshape(shape))
    return gf, holes.reshape(shape)


def glue_global(
    domain: ImplicitDomain,
    cover: BoundaryCover,
    mesh,
    u: GridFunction,
    Q: Window,
    r: float,
    charts=None,
):
    """Global extension on Q: u itself on P, the glued reflections weighted by
    phi_k near the boundary, and the phi_0 slot filled with the mesoscopic
    average field sum_j Phi_j M_j u (cell averages over B_{r/16}(x_j))."""
    import shapely

    sites = np.asarray(mesh.sites, float)
    bad = domain.sdf(sites) > -r / 16
    if bad.any():
        raise ValueError(
            f"averaging ball B_r/16 at site {np.flatnonzero(bad)[0]} leaves the domain"
        )
    meso_vals = np.array([_tau(u, s, r / 16) for s in sites])

    charts = build_charts(domain, cover) if charts is None else charts
    part = micro_partition(domain, cover)
    axes, pts = _out_grid(Q, u.h)
    shape = [len(a) for a in axes]
    sd = domain.sdf(pts)
    outside = sd >= 0

    phi0, terms = part.raw_terms(pts)
    num = np.zeros(len(pts))
    den = np.zeros(len(pts))
    for k, rows, vals in terms:
        sample = cover.samples[k]
        tau = _tau(u, sample.y, sample.r_inner)
        need = rows[outside[rows]]
        den[rows] += vals
        if len(need) == 0:
            continue
        shifted = dataclasses.replace(u, values=u.values - tau)
        ext = np.zeros(len(pts))
        ext[need] = local_extend(charts[k], shifted, pts[need]) + tau
        m = np.isin(rows, need)
        num[rows[m]] += vals[m] * ext[rows[m]]

    # mesoscopic field where phi_0 is active outside P
    needs_meso = outside & (phi0 > 0)
    meso = np.zeros(len(pts))
    if needs_meso.any():
        sub = pts[needs_meso]
        from shapely import points as shapely_points

        spts = shapely_points(sub)
        w = np.zeros((len(sites), len(sub)))
        for j, poly in enumerate(mesh.cells):
            dist = shapely.distance(poly, spts)
            w[j] = phi_cutoff(dist, r)
        tot = w.sum(axis=0)
        if np.any(tot <= 0):
            raise ValueError("mesoscopic partition does not cover a void node")
        meso[needs_meso] = (w * meso_vals[:, None]).sum(axis=0) / tot

    den_full = den + phi0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (num + phi0 * meso) / den_full
    out[den_full <= 0] = 0.0

    # node-exact on P when the output grid is aligned with u's nodes
    inside_vals = u.interp_support(pts)
    out = np.where(outside, out, inside_vals)
    return GridFunction(np.asarray(Q.lo, float), u.h, out.reshape(shape))


# ---------------------------------------------------------------------------
# traces


@dataclass
class TraceResult:
    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    trace_norm: float
    sobolev_norm: float
    constant: float


def trace_sample(domain: ImplicitDomain, u: GridFunction, r: float, p: float,
                 spacing: float | None = None) -> TraceResult:
    """One-sided boundary trace of a field sampled inside P, with the
    empirical constant ||Tu||_r / ||u||_{W^{1,p}}."""
    if spacing is None:
        spacing = u.h
    pts = boundary_points_of_primitives(domain, spacing)
    if len(pts) == 0:
        raise ValueError("no boundary inside the window")
    normals = _grad_many(domain, pts)
    vals = u.interp(pts - u.h * normals)
    retry = ~np.isfinite(vals)
    if retry.any():
        vals[retry] = u.interp(pts[retry] - 2 * u.h * normals[retry])
    if np.any(~np.isfinite(vals)):
        raise ValueError("boundary collar thinner than the grid spacing")
    weights = np.full(len(pts), spacing ** (u.dim - 1))
    trace_norm = float(np.sum(np.abs(vals) ** r * weights)) ** (1 / r)
    sob = (u.lp_norm(p) ** p + u.grad_lp_norm(p) ** p) ** (1 / p)
    return TraceResult(pts, vals, weights, trace_norm, sob,
                       trace_norm / sob if sob > 0 else np.inf)


# ---------------------------------------------------------------------------
# constants and baselines


def poincare_constant(p: float, q: float, R: float, r: float, d: int = 2,
                      C: float = 1.0) -> float:
    """Scaled Poincare constant
    C * R^{-d(1-p/q)+p} * ((R/r)^{p+1} + (R/r)^{d+1})."""
    if not (0 < r <= R):
        raise ValueError("need 0 < r <= R")
    if not (1 < p < np.inf):
        raise ValueError("need p in (1, inf)")
    if p < d:
        q_crit = d * p / (d - p)
        if q > q_crit:
            raise ValueError(f"q exceeds the critical index {q_crit:g}")
    return C * R ** (-d * (1 - p / q) + p) * ((R / r) ** (p + 1) + (R / r) ** (d + 1))


def periodic_baseline(domain: ImplicitDomain, u: GridFunction) -> GridFunction:
    """Extension across spherical holes of a periodic complement geometry by
    the radial two-point reflection; exact for constants, cell-local."""
    if not domain.complement or any(not isinstance(b, Ball) for b in domain.primitives):
        raise ValueError("baseline requires a complement-of-balls geometry")
    out = u.values.copy()
    nodes = u.nodes()
    for ball in domain.primitives:
        c = np.asarray(ball.center, float)
        rad = np.linalg.norm(nodes - c, axis=1)
        m = rad < ball.radius
        if not m.any():
            continue
        rr = rad[m]
        omega = (nodes[m] - c) / np.maximum(rr, 1e-300)[:, None]
        r1 = 1.5 * ball.radius - rr / 2
        r2 = 2 * ball.radius - rr
        v = 4 * u.interp(c + omega * r1[:, None]) - 3 * u.interp(c + omega * r2[:, None])
        flat = out.ravel()
        flat[np.flatnonzero(m)] = v
        out = flat.reshape(out.shape)
    return GridFunction(u.lo, u.h, out)


# ---------------------------------------------------------------------------
# scaling experiments


def scale_domain(domain: ImplicitDomain, eps: float, window: Window | None = None) -> ImplicitDomain:
    """The geometry eps*P: all primitive lengths multiplied by eps."""
    prims = []
    for b in domain.primitives:
        if isinstance(b, Ball):
            prims.append(Ball(tuple(eps * np.asarray(b.center)), eps * b.radius))
        elif isinstance(b, Pipe):
            prims.append(Pipe(tuple(eps * np.asarray(b.a)), tuple(eps * np.asarray(b.b)), eps * b.radius))
        else:
            raise ValueError(f"cannot scale primitive {type(b).__name__}")
    if window is None:
        window = Window(tuple(eps * np.asarray(domain.window.lo)),
                        tuple(eps * np.asarray(domain.window.hi)))
    return ImplicitDomain(tuple(prims), domain.complement, window, eps * domain.offset)


@dataclass
class ExtensionReport:
    rows: list

    def ratios(self, u_name: str, key: str = "ratio_grad"):
        return [row[key] for row in self.rows if row["u_name"] == u_name]

    def uniform_within_factor(self, factor: float = 2.0, key: str = "ratio_grad") -> bool:
        names = {row["u_name"] for row in self.rows}
        for name in names:
            vals = [v for v in self.ratios(name, key) if np.isfinite(v) and v > 0]
            if vals and max(vals) > factor * min(vals):
                return False
        return True


def scaling_experiment(
    model,
    eps_list,
    test_suite,
    p: float,
    r: float,
    Q: Window,
    meso_r: float,
    seed: int = 0,
    h: float | None = None,
    cover_kwargs: dict | None = None,
) -> ExtensionReport:
    """For each eps, builds the eps-scaled realization, applies the global
    operator to each test function and records the L^r(Q) / L^p(Q cap eps P)
    norm ratios.  ``test_suite`` is a list of (name, callable)."""
    cover_kwargs = cover_kwargs or {}
    rows = []
    for eps in sorted(eps_list, reverse=True):
        big = Window(
            tuple(np.asarray(Q.lo) / eps - 2 * meso_r),
            tuple(np.asarray(Q.hi) / eps + 2 * meso_r),
        )
        model_eps = dataclasses.replace(model, window=big)
        real = generate(model_eps, seed)
        domain = scale_domain(real.domain, eps)
        r_eps = eps * meso_r
        h_eps = r_eps / 16 if h is None else h
        if r_eps < 8 * h_eps:
            raise ValueError(f"eps={eps:g} below grid resolvability (eps*r < 8h)")

        kw = dict(cover_kwargs)
        kw.setdefault("profile_spacing", r_eps / 4)
        cover = adaptive_cover(domain, **kw)
        charts = build_charts(domain, cover)
        xr = lattice_points_Xr(domain, r_eps)
        mesh = voronoi(xr, domain.window)

        for name, fn in test_suite:
            # sample over the whole scaled window: the site averages and the
            # inner-ball means of cover balls near the edge of Q need u there
            u = GridFunction.from_callable(
                domain.window.lo, domain.window.hi, h_eps, fn,
                support=lambda xs: domain.sdf(xs) < 0,
            )
            ext = glue_global(domain, cover, mesh, u, Q, r_eps, charts=charts)
            in_Q = np.all(
                (u.nodes() >= np.asarray(Q.lo) - 1e-9)
                & (u.nodes() <= np.asarray(Q.hi) + 1e-9),
                axis=1,
            ).reshape(u.values.shape)
            rows.append(
                {
                    "eps": eps,
                    "h": h_eps,
                    "p": p,
                    "r": r,
                    "u_name": name,
                    "norm_u": u.lp_norm(p, mask=in_Q),
                    "norm_grad_u": u.grad_lp_norm(p, mask=in_Q & np.isfinite(u.values)),
                    "norm_Uu": ext.lp_norm(r),
                    "norm_grad_Uu": ext.grad_lp_norm(r),
                }
            )
            row = rows[-1]
            row["ratio_val"] = row["norm_Uu"] / row["norm_u"] if row["norm_u"] > 0 else np.inf
            row["ratio_grad"] = (
                row["norm_grad_Uu"] / row["norm_grad_u"] if row["norm_grad_u"] > 0 else np.inf
            )
    return ExtensionReport(rows)


EXTENSION_CSV_SCHEMA = "extension_report/1"


def write_extension_report_csv(report: ExtensionReport, path):
    cols = ["eps", "h", "p", "r", "u_name", "norm_u", "norm_grad_u",
            "norm_Uu", "norm_grad_Uu", "ratio_val", "ratio_grad"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# schema={EXTENSION_CSV_SCHEMA}"])
        writer.writerow(cols)
        for row in report.rows:
            writer.writerow(
                [row[c] if c == "u_name" else f"{row[c]:.17g}" for c in cols]
            )
