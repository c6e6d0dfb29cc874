"""Monte-Carlo estimation of the statistical hypotheses behind the pipeline.

Every routine here is a deterministic function of (model, master seed, N):
realization i uses the stream seeded by seed + i, and accumulators are merged
in seed order.  Bernoulli quantities carry Wilson confidence intervals; mean
estimators report mean +- standard error.

Averaging conventions (the computable face of the ergodic theorems):

* boundary quantities (delta, rho, rho_hat, M) are averaged with uniform
  weights over uniformly spaced boundary sample points, i.e. with respect to
  surface measure;
* bulk quantities are averaged with respect to volume.

The divergence flag of a moment report is a heuristic: the tail index is the
slope of the log-survival regression over the top decile of the pooled
samples, and an index above -(exponent) indicates an infinite moment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression
from shapely import contains_xy
from shapely.geometry import Point, box as shapely_box
from shapely.ops import unary_union

from .geometry import (
    GeometryModel,
    ImplicitDomain,
    Realization,
    Window,
    cone_contains,
    generate,
    lattice_points_Xr,
)
from .regularity import adaptive_cover
from .mesostructure import rings, voronoi
from .connectivity import build_graph, interior_cover, solve_harmonic, stretch_and_radius

MOMENTS_CSV_SCHEMA = "moments/1"
MIXING_CSV_SCHEMA = "mixing/1"

_MOMENT_FIELDS = ("M_tilde", "delta", "rho", "rho_hat", "eta")


# ---------------------------------------------------------------------------
# shared statistical helpers


def wilson_interval(k: int, n: int, z: float = 3.0):
    """Wilson score interval for a Bernoulli proportion k/n at z standard errors."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return float(max(0.0, center - half)), float(min(1.0, center + half))


def tail_index(samples, top_fraction: float = 0.1) -> float:
    """Slope of log P(X > x) against log x over the top decile of the samples.

    A finite sample of a light-tailed quantity gives a steeply negative slope;
    a heavy tail of index -a levels off near -a.  Returns -inf when the top
    decile is degenerate (all values equal), which signals a bounded tail.
    """
    x = np.sort(np.asarray(samples, float))
    n = len(x)
    if n < 10:
        raise ValueError("need at least 10 samples for a tail fit")
    k = max(3, int(np.ceil(top_fraction * n)))
    top = x[n - k :]
    if top[-1] <= 0 or top[0] == top[-1]:
        return -np.inf
    surv = (n - np.arange(n - k, n)) / n
    mask = top > 0
    slope = np.polyfit(np.log(top[mask]), np.log(surv[mask]), 1)[0]
    return float(slope)


def fit_nonincreasing(y) -> np.ndarray:
    """Isotonic (pool-adjacent-violators) projection onto nonincreasing sequences."""
    return np.asarray(isotonic_regression(np.asarray(y, float), increasing=False).x)


def _realize(model, seed: int) -> Realization:
    """Realize a model; deterministic domains pass through unchanged."""
    if isinstance(model, GeometryModel):
        return generate(model, seed)
    if isinstance(model, Realization):
        return model
    if isinstance(model, ImplicitDomain):
        return Realization(None, seed, model, {})
    raise TypeError(f"cannot realize {model!r}")


def _model_points(real: Realization) -> np.ndarray:
    """The generating point set of a realization (centers, thinned points, shifts)."""
    for key in ("centers", "matern", "cell_shifts"):
        if key in real.points:
            return np.asarray(real.points[key], float)
    raise ValueError("realization carries no generating point set")


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class MomentReport:
    name: str
    exponent: float
    n_samples: int
    mean: float
    se: float
    tail_index: float
    divergent: bool


@dataclass(frozen=True)
class MixingReport:
    alpha: float
    R: np.ndarray
    p_hat: np.ndarray          # P(all 2d axis cones up to radius R are hit)
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    f_hat: np.ndarray          # isotonic nonincreasing fit of 1 - p_hat
    n_samples: int
    ball_p_hat: np.ndarray | None = None

    def f_interp(self, R):
        """Evaluate the fitted decay at arbitrary radii (1 left of the grid)."""
        R = np.asarray(R, float)
        return np.interp(R, self.R, self.f_hat, left=1.0, right=float(self.f_hat[-1]))


@dataclass(frozen=True)
class DiameterReport:
    diameters: np.ndarray
    grid: np.ndarray
    survival: np.ndarray
    c_alpha: float | None = None
    dominance_fraction: float | None = None


@dataclass(frozen=True)
class CellSumReport:
    estimate: float
    series_sum: float
    fitted_c: float

    @property
    def bound(self) -> float:
        return self.fitted_c * self.series_sum


@dataclass(frozen=True)
class StretchTailReport:
    S: np.ndarray
    grid: np.ndarray
    survival: np.ndarray
    window_factors: tuple
    coverage_ratios: np.ndarray


# ---------------------------------------------------------------------------
# ergodic averages


def ergodic_average(model, f, sizes, h: float, seed: int = 0):
    """Averages of a pointwise field over nested centered boxes.

    The field is evaluated once per grid node (cell centers at spacing h over
    the largest box) on a single realization; each window average reuses the
    nodes it contains, so the sequence is an honest convex averaging sequence.
    Returns (sizes, averages, successive absolute differences).
    """
    sizes = np.sort(np.asarray(sizes, float))
    if h <= 0:
        raise ValueError("resolution must be positive")
    real = _realize(model, seed)
    window = real.domain.window
    half = sizes[-1] / 2
    if np.any(half > np.minimum(-np.asarray(window.lo), np.asarray(window.hi))):
        raise ValueError(f"window of size {sizes[-1]} exceeds the generated region")
    n = int(np.ceil(sizes[-1] / h))
    axis = -half + h * (np.arange(n) + 0.5)
    grids = np.meshgrid(*([axis] * window.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.asarray(f(real, pts), float)
    averages = np.empty(len(sizes))
    for i, L in enumerate(sizes):
        inside = np.all(np.abs(pts) <= L / 2, axis=1)
        if not inside.any():
            raise ValueError(f"window of size {L} contains no grid nodes at h={h}")
        averages[i] = vals[inside].mean()
    return sizes, averages, np.abs(np.diff(averages))


def chi_P(real: Realization, pts) -> np.ndarray:
    """Indicator of the perforated set, the canonical ergodic test field."""
    return (real.domain.sdf(pts) < 0).astype(float)


# ---------------------------------------------------------------------------
# isotropic cone mixing


def cone_mixing_f(
    model: GeometryModel,
    alpha: float,
    R_grid,
    N: int,
    seed: int = 0,
    ball_r: float | None = None,
) -> MixingReport:
    """Empirical cone-mixing decay over N realizations.

    For each realization and radius R the event is "every one of the 2d axis
    cones of half-angle alpha and height R at the origin contains a process
    point"; f_hat(R) is the isotonic nonincreasing fit of 1 - P(event).  With
    ball_r set, additionally estimates the sufficient ball criterion
    P(exists lattice x with B_{4 sqrt(d) ball_r}(x) inside B_R(0) and P).
    """
    if not 0 < alpha < np.pi / 2:
        raise ValueError("cone half-angle must lie in (0, pi/2)")
    R_grid = np.sort(np.asarray(R_grid, float))
    window = model.window.expand(model.margin)
    reach = min(min(-lo, hi) for lo, hi in zip(window.lo, window.hi))
    if R_grid[-1] > reach:
        raise ValueError(f"radius {R_grid[-1]} exceeds the generated margin {reach}")
    d = model.window.dim
    dirs = np.concatenate([np.eye(d), -np.eye(d)])

    hits = np.zeros((N, len(R_grid)), bool)
    ball_hits = np.zeros((N, len(R_grid)), bool) if ball_r is not None else None
    for i in range(N):
        real = generate(model, seed + i)
        pts = _model_points(real)
        worst = 0.0 if len(pts) else np.inf
        for e in dirs:
            in_cone = cone_contains(np.zeros(d), e, alpha, np.inf, pts) if len(pts) else []
            sel = pts[in_cone] if len(pts) else pts
            reach_e = float(np.linalg.norm(sel, axis=1).min()) if len(sel) else np.inf
            worst = max(worst, reach_e)
        hits[i] = worst < R_grid
        if ball_r is not None:
            g = 4 * np.sqrt(d) * ball_r
            lat = lattice_points_Xr(real.domain, ball_r, window=window)
            deep = lat[real.domain.sdf(lat) <= -g] if len(lat) else lat
            m0 = np.inf if len(deep) == 0 else float(np.linalg.norm(deep, axis=1).min()) + g
            ball_hits[i] = m0 <= R_grid

    k = hits.sum(axis=0)
    p_hat = k / N
    ci = np.array([wilson_interval(int(ki), N) for ki in k])
    f_hat = fit_nonincreasing(1.0 - p_hat)
    return MixingReport(
        alpha, R_grid, p_hat, ci[:, 0], ci[:, 1], f_hat, N,
        None if ball_hits is None else ball_hits.mean(axis=0),
    )


def diameter_distribution(
    model: GeometryModel,
    r: float,
    N: int,
    seed: int = 0,
    mixing: MixingReport | None = None,
    grid=None,
) -> DiameterReport:
    """Pooled Voronoi cell diameters of the lattice process, with dominance check.

    Only unclipped cells enter the pool (clipped diameters are window
    artifacts).  When a mixing report is supplied, the calibration constant
    C_alpha is fitted as the smallest value on a log grid for which
    P(d > D) <= f_hat(D / (2 C_alpha)) holds on at least 95% of the grid.
    """
    pool = []
    for i in range(N):
        real = generate(model, seed + i)
        sites = lattice_points_Xr(real.domain, r)
        if len(sites) == 0:
            continue
        mesh = voronoi(sites, real.domain.window, min_separation=r)
        pool.append(mesh.diameters[~mesh.clipped])
    if not pool:
        raise ValueError("no unclipped cells over the requested realizations")
    diameters = np.sort(np.concatenate(pool))
    if grid is None:
        grid = np.linspace(0.0, float(diameters[-1]) * 1.05, 64)
    grid = np.asarray(grid, float)
    survival = np.array([(diameters > D).mean() for D in grid])

    c_alpha = dominance = None
    if mixing is not None:
        best = (-1.0, None)
        for c in np.geomspace(0.05, 50.0, 120):
            frac = float(np.mean(survival <= mixing.f_interp(grid / (2 * c)) + 1e-12))
            if frac >= 0.95:
                best = (frac, float(c))
                break
            if frac > best[0]:
                best = (frac, float(c))
        dominance, c_alpha = best
    return DiameterReport(diameters, grid, survival, c_alpha, dominance)


# ---------------------------------------------------------------------------
# moment conditions


def _sample_field(cover, name: str) -> np.ndarray:
    if name not in _MOMENT_FIELDS:
        raise ValueError(f"unknown regularity field {name!r}; choose from {_MOMENT_FIELDS}")
    if name == "M_tilde":
        return np.array([s.m + 1.0 for s in cover.samples])
    return np.array([getattr(s, name) for s in cover.samples])


def moment_conditions(
    model,
    specs,
    N: int,
    seed: int = 0,
    profile_spacing: float = 0.5,
    cover_kwargs: dict | None = None,
    cover_fn=None,
):
    """Surface-measure moment estimates E(field^exponent) over N realizations.

    specs is a list of (field, exponent) pairs with field one of
    ("M_tilde", "delta", "rho", "rho_hat", "eta"); negative exponents probe
    inverse moments.  The divergence flag compares the tail index of the
    (possibly inverted) field against -(|exponent|).  cover_fn(domain) may
    replace the default adaptive boundary cover.
    """
    specs = [(str(name), float(e)) for name, e in specs]
    for name, _ in specs:
        if name not in _MOMENT_FIELDS:
            raise ValueError(f"unknown regularity field {name!r}; choose from {_MOMENT_FIELDS}")
    kwargs = dict(cover_kwargs or {})
    pools: dict = {name: [] for name, _ in specs}
    for i in range(N):
        real = _realize(model, seed + i)
        if cover_fn is not None:
            cover = cover_fn(real.domain)
        else:
            cover = adaptive_cover(real.domain, profile_spacing, **kwargs)
        for name in pools:
            pools[name].append(_sample_field(cover, name))

    reports = []
    for name, e in specs:
        x = np.concatenate(pools[name])
        y = x ** e
        mean = float(y.mean())
        se = float(y.std(ddof=1) / np.sqrt(len(y))) if len(y) > 1 else 0.0
        w = x if e > 0 else 1.0 / x
        t = tail_index(w)
        reports.append(MomentReport(name, e, len(y), mean, se, t, bool(t > -abs(e))))
    return reports


# ---------------------------------------------------------------------------
# cell-sum moments


def cell_sum_moment(
    model: GeometryModel,
    eta: float,
    xi: float,
    zeta: float,
    p: float,
    N: int,
    r: float,
    seed: int = 0,
    marks=None,
    fit_r: float = 2.0,
) -> CellSumReport:
    """Volume average of the marked cell-sum field raised to the power p.

    The field assigns to each point the mark d^eta s^xi n^zeta of the Voronoi
    cell containing it; its p-th volume moment is a cell-area-weighted sum.
    marks(mesh) may supply per-cell (s, n) arrays (default: both identically
    one).  The report carries the plug-in series bound built from unit-bin
    histograms of (d, n, s) and the constant C >= 1 fitted to dominate the
    direct estimate.
    """
    if min(eta, xi, zeta) < 0 or p < 1:
        raise ValueError("exponents must be nonnegative and p >= 1")
    estimates = []
    d_pool, n_pool, s_pool = [], [], []
    dim = model.window.dim
    for i in range(N):
        real = generate(model, seed + i)
        sites = lattice_points_Xr(real.domain, r)
        if len(sites) == 0:
            continue
        mesh = voronoi(sites, real.domain.window, min_separation=r)
        if marks is None:
            s_arr = np.ones(len(sites))
            n_arr = np.ones(len(sites))
        else:
            s_arr, n_arr = (np.asarray(a, float) for a in marks(mesh))
        areas = np.array([c.area for c in mesh.cells])
        vals = mesh.diameters ** eta * s_arr ** xi * n_arr ** zeta
        estimates.append(float((areas * vals ** p).sum() / real.domain.window.volume))
        keep = ~mesh.clipped
        d_pool.append(mesh.diameters[keep])
        n_pool.append(n_arr[keep])
        s_pool.append(s_arr[keep])
    if not estimates:
        raise ValueError("no cells over the requested realizations")
    estimate = float(np.mean(estimates))

    series = 0.0
    dd = np.concatenate(d_pool)
    nn = np.concatenate(n_pool)
    ss = np.concatenate(s_pool)
    e_d = dim * (p + 1) + eta * p + fit_r * (p - 1)
    e_s = xi * p + fit_r * (p - 1)
    e_n = dim * (p + 1) + zeta * p + fit_r * (p - 1)
    for k in range(int(np.floor(dd.max())) + 1):
        P_d = float(((dd >= k) & (dd < k + 1)).mean())
        if P_d == 0:
            continue
        for Nn in range(int(np.floor(nn.max())) + 1):
            P_n = float(((nn >= Nn) & (nn < Nn + 1)).mean())
            if P_n == 0:
                continue
            for S in range(int(np.floor(ss.max())) + 1):
                P_s = float(((ss >= S) & (ss < S + 1)).mean())
                if P_s == 0:
                    continue
                series += (k + 1) ** e_d * (S + 1) ** e_s * (Nn + 1) ** e_n * P_d * P_n * P_s
    fitted_c = max(1.0, estimate / series) if series > 0 else np.inf
    return CellSumReport(estimate, float(series), float(fitted_c))


# ---------------------------------------------------------------------------
# mesoscopic constants


def _poly_mask(poly, pts: np.ndarray) -> np.ndarray:
    return contains_xy(poly, pts[:, 0], pts[:, 1])


def rough_meso_constants(
    realization: Realization,
    mesh,
    p: float,
    r: float,
    s: float,
    Q: Window,
    meso_r: float,
    m_tilde=None,
    s_tilde: float | None = None,
    d_hat: float | None = None,
    h: float | None = None,
    C: float = 1.0,
):
    """Quadrature of the two mesoscopic constants of the rough estimate.

    With P(x) = x^{d(2r-1)+r} (x^{r+1} + x^{d+1}) and the third ring fA_3 of
    each cell, computes

      C_bulk = (C <(sum_k P(d_k) chi_k)^{p/(p-s)}>_{P cap Q})^{(p-s)/p}
               * (C <M_tilde^{2 p d_hat/(s-r)}>_{P cap Q})^{(s-r)/p}
      C_hole = (<a^{q-1} sum_k P(d_k)^q chi_k>_{Q minus P})^{(s~-r)/s~}

    where a is the ring overlap count, q = s~/(s~-r), angle brackets are
    window-volume averages, and m_tilde(pts) is the bulk Lipschitz field
    (default 1).  d_hat defaults to the ambient dimension.
    """
    if p == s:
        raise ValueError("degenerate exponents: p must differ from s")
    if not (1 <= r < s < p):
        raise ValueError("exponents must satisfy 1 <= r < s < p")
    s_tilde = s if s_tilde is None else s_tilde
    if not (r < s_tilde < p):
        raise ValueError("s_tilde must lie strictly between r and p")
    d = len(Q.lo)
    d_hat = float(d if d_hat is None else d_hat)
    h = meso_r / 8 if h is None else h

    axes = [lo + h * (np.arange(int(np.ceil((hi - lo) / h))) + 0.5)
            for lo, hi in zip(Q.lo, Q.hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    cell = h ** d / Q.volume
    inside = realization.domain.sdf(pts) < 0

    def Pd(x):
        return x ** (d * (2 * r - 1) + r) * (x ** (r + 1) + x ** (d + 1))

    q2 = s_tilde / (s_tilde - r)
    sumP = np.zeros(len(pts))
    sumPq = np.zeros(len(pts))
    count = np.zeros(len(pts))
    for k in range(len(mesh.sites)):
        fa3 = rings(mesh, k, meso_r)[2]
        m = _poly_mask(fa3, pts)
        val = Pd(float(mesh.diameters[k]))
        sumP[m] += val
        sumPq[m] += val ** q2
        count[m] += 1.0

    mt = np.ones(len(pts)) if m_tilde is None else np.asarray(m_tilde(pts), float)
    term1 = C * (inside * sumP ** (p / (p - s))).sum() * cell
    term2 = C * (inside * mt ** (2 * p * d_hat / (s - r))).sum() * cell
    C_bulk = term1 ** ((p - s) / p) * term2 ** ((s - r) / p)
    overlap = np.where(count > 0, count, 1.0)
    C_hole = ((~inside * overlap ** (q2 - 1) * sumPq).sum() * cell) ** ((s_tilde - r) / s_tilde)
    return float(C_bulk), float(C_hole)


def harmonic_constant_probe(
    realization: Realization,
    mesh,
    k: int,
    s: float,
    meso_r: float,
    test_suite,
    h: float | None = None,
):
    """Empirical lower bound for the best mesoscopic Poincare-type constant.

    Maximizes int_{fA3 cap P} |u - M_k u|^s / int_{fA4 cap P} |grad u|^s over
    the supplied (name, u, grad_u) triples, where M_k is the mean over the
    ball B_{meso_r/16}(x_k) cap P and fA4 = B_{2 d_k}(fA3).  Test functions
    with vanishing gradient energy are skipped; returns (C_hat, per-test dict).
    """
    fa3 = rings(mesh, k, meso_r)[2]
    dk = float(mesh.diameters[k])
    fa4 = fa3.buffer(2 * dk)
    h = meso_r / 8 if h is None else h

    lo = np.array(fa4.bounds[:2])
    hi = np.array(fa4.bounds[2:])
    axes = [a + h * (np.arange(int(np.ceil((b - a) / h))) + 0.5) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    inP = realization.domain.sdf(pts) < 0
    in3 = _poly_mask(fa3, pts) & inP
    in4 = _poly_mask(fa4, pts) & inP
    if not in3.any():
        raise ValueError("third ring contains no quadrature nodes inside the domain")

    ball_r = meso_r / 16
    hb = ball_r / 4
    baxes = [c - ball_r + hb * (np.arange(8) + 0.5) for c in mesh.sites[k]]
    bgrids = np.meshgrid(*baxes, indexing="ij")
    bpts = np.stack([g.ravel() for g in bgrids], axis=1)
    bmask = (np.linalg.norm(bpts - mesh.sites[k], axis=1) <= ball_r) & (
        realization.domain.sdf(bpts) < 0
    )
    if not bmask.any():
        raise ValueError("averaging ball misses the domain; site too shallow")
    bpts = bpts[bmask]

    ratios = {}
    best = 0.0
    for name, u, grad_u in test_suite:
        Mk = float(np.mean(u(bpts)))
        num = float(np.sum(np.abs(u(pts[in3]) - Mk) ** s))
        g = np.asarray(grad_u(pts[in4]), float)
        den = float(np.sum(np.linalg.norm(np.atleast_2d(g), axis=-1) ** s))
        if den < 1e-14:
            continue
        ratios[name] = num / den
        best = max(best, num / den)
    return best, ratios


# ---------------------------------------------------------------------------
# stretch tails and path coverage


def stretch_tail(
    model: GeometryModel,
    N: int,
    r: float,
    seed: int = 0,
    profile_spacing: float = 0.5,
    cover_kwargs: dict | None = None,
    window_factors=(0.5, 1.0),
    grid=None,
) -> StretchTailReport:
    """Pooled stretch-factor survival and harmonic-path window coverage.

    Runs the whole cover -> graph -> harmonic -> stretch pipeline per
    realization, pools the per-site stretch factors S_j, and for each window
    fraction reports |box| / |box cap union_j B_{S_j d_j}(x_j)| — the ratio
    that should trend to 1 as the windows grow.
    """
    kwargs = dict(cover_kwargs or {})
    S_pool = []
    cover_area = {f: [0.0, 0.0] for f in window_factors}
    for i in range(N):
        real = generate(model, seed + i)
        domain = real.domain
        cover = adaptive_cover(domain, profile_spacing, **kwargs)
        sites = lattice_points_Xr(domain, r)
        if len(sites) == 0:
            continue
        mesh = voronoi(sites, domain.window, min_separation=r)
        interior = interior_cover(domain, cover, sites, r)
        graph = build_graph(domain, cover, interior)
        balls = []
        for j in range(len(sites)):
            res = stretch_and_radius(graph, mesh, j)
            S_pool.append(res.S)
            balls.append(Point(sites[j]).buffer(res.S * res.d))
        union = unary_union(balls)
        lo = np.asarray(domain.window.lo)
        hi = np.asarray(domain.window.hi)
        mid = (lo + hi) / 2
        for f in window_factors:
            b = shapely_box(*(mid + f * (lo - mid)), *(mid + f * (hi - mid)))
            cover_area[f][0] += b.area
            cover_area[f][1] += b.intersection(union).area
    if not S_pool:
        raise ValueError("no lattice sites over the requested realizations")
    S = np.sort(np.asarray(S_pool))
    if grid is None:
        grid = np.linspace(1.0, float(S[-1]) * 1.05, 64)
    grid = np.asarray(grid, float)
    survival = np.array([(S > s0).mean() for s0 in grid])
    ratios = np.array([
        cover_area[f][0] / cover_area[f][1] if cover_area[f][1] > 0 else np.inf
        for f in window_factors
    ])
    return StretchTailReport(S, grid, survival, tuple(window_factors), ratios)


# ---------------------------------------------------------------------------
# CSV reports


def write_moments_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"# schema {MOMENTS_CSV_SCHEMA}"])
        w.writerow(["name", "exponent", "n", "mean", "se", "tail_index", "divergent"])
        for rep in reports:
            w.writerow([
                rep.name, "%.17g" % rep.exponent, rep.n_samples,
                "%.17g" % rep.mean, "%.17g" % rep.se,
                "%.17g" % rep.tail_index, int(rep.divergent),
            ])


def write_mixing_csv(report: MixingReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"# schema {MIXING_CSV_SCHEMA}"])
        w.writerow(["R", "p_hat", "ci_lo", "ci_hi", "f_hat"])
        for row in zip(report.R, report.p_hat, report.ci_lo, report.ci_hi, report.f_hat):
            w.writerow(["%.17g" % v for v in row])
