"""Implicit perforated domains: primitives, signed distances, morphological
hulls, point-process samplers and the stochastic geometry models.

A domain is a union of balls and pipes (or the complement of such a union)
carrying an exact-for-primitives signed distance.  All stochastic generation
happens inside ``window + margin`` so that statistics restricted to the core
window are free of edge bias.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree

__all__ = [
    "Window",
    "Ball",
    "Pipe",
    "HalfSpaceGraphChart",
    "ImplicitDomain",
    "BooleanBalls",
    "DelaunayPipes",
    "PeriodicReference",
    "GeometryModel",
    "Realization",
    "signed_distance",
    "erode",
    "dilate",
    "cone_contains",
    "sample_poisson",
    "matern_thin",
    "lattice_points_Xr",
    "generate",
    "rasterize",
    "dump_geometry",
    "load_geometry",
    "realization_rng",
]

MAX_RASTER_CELLS = 64_000_000
_POISSON_MEAN_CAP = 1e8


@dataclass(frozen=True)
class Window:
    """Axis-aligned box [lo, hi] in dimension 2 or 3."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size not in (2, 3):
            raise ValueError("window must be 2D or 3D")
        if not np.all(lo < hi):
            raise ValueError("window requires lo < hi componentwise")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((x >= lo) & (x <= hi), axis=1)

    def expand(self, margin: float) -> "Window":
        lo = tuple(v - margin for v in self.lo)
        hi = tuple(v + margin for v in self.hi)
        return Window(lo, hi)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def sdf(self, x: np.ndarray) -> np.ndarray:
        d = x - np.asarray(self.center)
        return np.sqrt(np.sum(d * d, axis=-1)) - self.radius


@dataclass(frozen=True)
class Pipe:
    """Finite solid cylinder around the segment [a, b] (flat caps)."""

    a: tuple
    b: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("pipe radius must be positive")
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if a == b:
            raise ValueError("pipe endpoints must be distinct")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def sdf(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(self.a)
        b = np.asarray(self.b)
        axis = b - a
        length = float(np.linalg.norm(axis))
        u = axis / length
        rel = x - a
        t = np.sum(rel * u, axis=-1)
        perp = rel - t[..., None] * u
        dr = np.sqrt(np.sum(perp * perp, axis=-1)) - self.radius
        da = np.abs(t - 0.5 * length) - 0.5 * length
        out = np.sqrt(np.maximum(dr, 0.0) ** 2 + np.maximum(da, 0.0) ** 2)
        inner = np.minimum(np.maximum(dr, da), 0.0)
        return out + inner


@dataclass(frozen=True)
class HalfSpaceGraphChart:
    """Region below the graph of a Lipschitz height function.

    The half space sits at ``origin`` with outward ``normal``; a point with
    tangential offset t and height w (along the normal) belongs to the set iff
    w < fn(t).  For the flat case (fn is None) the signed distance is exact;
    otherwise it is the vertical gap scaled by sqrt(1 + L^2), which keeps the
    1-Lipschitz property for a declared Lipschitz bound L.
    """

    origin: tuple
    normal: tuple
    fn: Callable | None = None
    lipschitz: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, float)
        n = n / np.linalg.norm(n)
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "normal", tuple(float(v) for v in n))

    def sdf(self, x: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal)
        rel = x - np.asarray(self.origin)
        w = np.sum(rel * n, axis=-1)
        if self.fn is None:
            return w
        t = rel - w[..., None] * n
        h = np.asarray(self.fn(t), float)
        return (w - h) / np.sqrt(1.0 + self.lipschitz**2)


Primitive = Ball | Pipe | HalfSpaceGraphChart


@dataclass(frozen=True)
class ImplicitDomain:
    """Union of primitives (or its complement) with signed-distance queries.

    ``offset`` shifts the level set: the stored set is {sdf_base + offset < 0},
    which realizes erosion (offset > 0) and dilation (offset < 0) exactly for
    single primitives.
    """

    primitives: tuple
    complement: bool
    window: Window
    offset: float = 0.0

    def sdf(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        squeeze = x.ndim == 1
        pts = np.atleast_2d(x)
        if not self.primitives:
            val = np.full(pts.shape[0], np.inf)
        else:
            val = self.primitives[0].sdf(pts)
            for prim in self.primitives[1:]:
                val = np.minimum(val, prim.sdf(pts))
        if self.complement:
            val = -val
        val = val + self.offset
        return float(val[0]) if squeeze else val

    def contains(self, x) -> np.ndarray:
        s = self.sdf(x)
        return s < 0

    @property
    def dim(self) -> int:
        return self.window.dim


def signed_distance(domain: ImplicitDomain, x) -> np.ndarray:
    """Signed distance to the domain boundary: negative inside, positive outside."""
    return domain.sdf(x)


def erode(domain: ImplicitDomain, r: float) -> ImplicitDomain:
    """Inner hull P_{-r} = {x : dist(x, R^d \\ P) >= r}."""
    if r < 0:
        raise ValueError("erosion radius must be >= 0")
    return replace(domain, offset=domain.offset + r)


def dilate(domain: ImplicitDomain, r: float) -> ImplicitDomain:
    """Outer hull P_r = {x : dist(x, P) <= r}."""
    if r < 0:
        raise ValueError("dilation radius must be >= 0")
    return replace(domain, offset=domain.offset - r)


def cone_contains(apex, nu, alpha: float, height: float, z) -> np.ndarray:
    """Membership in the open cone with apex, axis nu, half angle alpha and height."""
    if not 0 < alpha < np.pi / 2:
        raise ValueError("cone angle must lie in (0, pi/2)")
    if height <= 0:
        raise ValueError("cone height must be positive")
    nu = np.asarray(nu, float)
    nu = nu / np.linalg.norm(nu)
    rel = np.atleast_2d(np.asarray(z, float)) - np.asarray(apex, float)
    norm = np.linalg.norm(rel, axis=1)
    inside = (norm < height) & (rel @ nu > norm * np.cos(alpha))
    return inside if np.ndim(z) > 1 else bool(inside[0])


# ---------------------------------------------------------------------------
# point processes


def realization_rng(master_seed: int, index: int = 0) -> np.random.Generator:
    """Derive the per-realization stream: PCG64 seeded by SeedSequence(master, index).

    The generator identity (numpy PCG64 + SeedSequence spawn-by-key) is part of
    the reproducibility contract; identical (master_seed, index) gives identical
    streams on any platform running the same numpy generator.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), int(index)])))


def sample_poisson(window: Window, intensity: float, rng) -> np.ndarray:
    """Homogeneous Poisson process on the window; returns an (N, d) array."""
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    if np.isscalar(rng) or isinstance(rng, (int, np.integer)):
        rng = realization_rng(int(rng))
    mean = intensity * window.volume
    if mean > _POISSON_MEAN_CAP:
        raise ValueError(f"expected count {mean:.3g} exceeds cap {_POISSON_MEAN_CAP:.0g}")
    n = rng.poisson(mean)
    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    return lo + rng.random((n, window.dim)) * (hi - lo)


def matern_thin(points: np.ndarray, gap: float) -> np.ndarray:
    """Matern-II style mutual erasure: drop every point with a neighbor closer than gap."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    pts = np.atleast_2d(np.asarray(points, float))
    if len(pts) == 0:
        return pts
    tree = cKDTree(pts)
    pairs = tree.query_pairs(gap * (1 - 1e-12), output_type="ndarray")
    bad = np.zeros(len(pts), bool)
    if len(pairs):
        bad[pairs.ravel()] = True
    return pts[~bad]


def lattice_points_Xr(domain: ImplicitDomain, r: float, window: Window | None = None) -> np.ndarray:
    """Lattice process 2r Z^d intersected with the eroded set P_{-r}, clipped to window."""
    if r <= 0:
        raise ValueError("r must be positive")
    window = window or domain.window
    axes = []
    for lo, hi in zip(window.lo, window.hi):
        k0 = int(np.ceil(lo / (2 * r)))
        k1 = int(np.floor(hi / (2 * r)))
        axes.append(2 * r * np.arange(k0, k1 + 1))
    if any(len(a) == 0 for a in axes):
        return np.empty((0, window.dim))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = domain.sdf(pts) <= -r
    return pts[keep]


# ---------------------------------------------------------------------------
# geometry models


@dataclass(frozen=True)
class BooleanBalls:
    intensity: float
    ball_radius: float = 1.0
    complement: bool = False


@dataclass(frozen=True)
class DelaunayPipes:
    intensity: float
    hardcore_gap: float
    smoothing_ball_radius: float
    # (lo_frac, hi_frac): pipe radii uniform on [lo_frac*r, hi_frac*r]
    pipe_radius_law: tuple = (0.2, 0.9)


@dataclass(frozen=True)
class PeriodicReference:
    cell_primitives: tuple
    cell_size: float = 1.0
    complement: bool = True


@dataclass(frozen=True)
class GeometryModel:
    kind: BooleanBalls | DelaunayPipes | PeriodicReference
    window: Window
    margin: float

    def __post_init__(self):
        k = self.kind
        if isinstance(k, (BooleanBalls, DelaunayPipes)) and k.intensity <= 0:
            raise ValueError("intensity must be positive")
        if isinstance(k, DelaunayPipes) and k.hardcore_gap <= 0:
            raise ValueError("hardcore gap must be positive")
        if self.margin < self._min_margin():
            raise ValueError(f"margin {self.margin} below largest interaction radius")

    def _min_margin(self) -> float:
        k = self.kind
        if isinstance(k, BooleanBalls):
            return k.ball_radius
        if isinstance(k, DelaunayPipes):
            return k.smoothing_ball_radius
        return 0.0


@dataclass(frozen=True)
class Realization:
    """One frozen sample of a geometry model: domain plus generating point sets."""

    model: GeometryModel
    seed: int
    domain: ImplicitDomain
    points: dict = field(default_factory=dict)


def generate(model: GeometryModel, seed: int) -> Realization:
    """Sample one realization; a pure function of (model, seed)."""
    rng = realization_rng(seed)
    gen_window = model.window.expand(model.margin)
    kind = model.kind
    points: dict = {}

    if isinstance(kind, BooleanBalls):
        centers = sample_poisson(gen_window, kind.intensity, rng)
        prims = tuple(Ball(tuple(c), kind.ball_radius) for c in centers)
        domain = ImplicitDomain(prims, kind.complement, model.window)
        points["centers"] = centers

    elif isinstance(kind, DelaunayPipes):
        raw = sample_poisson(gen_window, kind.intensity, rng)
        kept = matern_thin(raw, kind.hardcore_gap)
        r = kind.smoothing_ball_radius
        prims = [Ball(tuple(p), r) for p in kept]
        edges = np.empty((0, 2), int)
        if len(kept) >= model.window.dim + 1:
            tri = Delaunay(kept)
            edge_set = set()
            for simplex in tri.simplices:
                for i in range(len(simplex)):
                    for j in range(i + 1, len(simplex)):
                        edge_set.add(tuple(sorted((int(simplex[i]), int(simplex[j])))))
            edges = np.array(sorted(edge_set), int)
        lo_frac, hi_frac = kind.pipe_radius_law
        radii = r * (lo_frac + (hi_frac - lo_frac) * rng.random(len(edges)))
        for (i, j), rad in zip(edges, radii):
            prims.append(Pipe(tuple(kept[i]), tuple(kept[j]), float(rad)))
        domain = ImplicitDomain(tuple(prims), False, model.window)
        points["poisson"] = raw
        points["matern"] = kept
        points["delaunay_edges"] = edges

    elif isinstance(kind, PeriodicReference):
        a = kind.cell_size
        prims = []
        lo = np.asarray(gen_window.lo)
        hi = np.asarray(gen_window.hi)
        k0 = np.floor(lo / a).astype(int)
        k1 = np.ceil(hi / a).astype(int)
        ranges = [np.arange(k0[i], k1[i] + 1) for i in range(len(lo))]
        grids = np.meshgrid(*ranges, indexing="ij")
        shifts = np.stack([g.ravel() for g in grids], axis=1) * a
        for shift in shifts:
            for prim in kind.cell_primitives:
                if isinstance(prim, Ball):
                    prims.append(Ball(tuple(np.asarray(prim.center) + shift), prim.radius))
                elif isinstance(prim, Pipe):
                    prims.append(
                        Pipe(tuple(np.asarray(prim.a) + shift), tuple(np.asarray(prim.b) + shift), prim.radius)
                    )
                else:
                    raise ValueError("periodic cells support balls and pipes only")
        domain = ImplicitDomain(tuple(prims), kind.complement, model.window)
        points["cell_shifts"] = shifts
    else:
        raise TypeError(f"unknown geometry model {kind!r}")

    return Realization(model, seed, domain, points)


def rasterize(domain: ImplicitDomain, h: float, max_cells: int = MAX_RASTER_CELLS):
    """Membership booleans at cell centers of a grid with spacing h over window."""
    if h <= 0:
        raise ValueError("resolution must be positive")
    window = domain.window
    counts = [int(np.ceil((hi - lo) / h)) for lo, hi in zip(window.lo, window.hi)]
    if np.prod(counts) > max_cells:
        raise ValueError(f"raster of {np.prod(counts)} cells exceeds cap {max_cells}")
    axes = [lo + h * (np.arange(n) + 0.5) for lo, n in zip(window.lo, counts)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    inside = domain.sdf(pts) < 0
    return inside.reshape(counts), axes


# ---------------------------------------------------------------------------
# geometry dumps (line oriented; round-trip exact at 17 significant digits)


def dump_geometry(domain: ImplicitDomain) -> str:
    buf = io.StringIO()
    w = domain.window
    buf.write(f"DIM {w.dim}\n")
    buf.write("WINDOW " + " ".join(f"{v:.17g}" for v in (*w.lo, *w.hi)) + "\n")
    buf.write(f"COMPLEMENT {1 if domain.complement else 0}\n")
    for prim in domain.primitives:
        if isinstance(prim, Ball):
            coords = (*prim.center, prim.radius)
            buf.write("BALL " + " ".join(f"{v:.17g}" for v in coords) + "\n")
        elif isinstance(prim, Pipe):
            coords = (*prim.a, *prim.b, prim.radius)
            buf.write("PIPE " + " ".join(f"{v:.17g}" for v in coords) + "\n")
        else:
            raise ValueError("only balls and pipes can be dumped")
    return buf.getvalue()


def load_geometry(text: str) -> ImplicitDomain:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError("truncated geometry dump")
    dim = int(lines[0].split()[1])
    wvals = [float(v) for v in lines[1].split()[1:]]
    window = Window(tuple(wvals[:dim]), tuple(wvals[dim:]))
    complement = bool(int(lines[2].split()[1]))
    prims = []
    for ln in lines[3:]:
        tag, *vals = ln.split()
        vals = [float(v) for v in vals]
        if tag == "BALL":
            prims.append(Ball(tuple(vals[:dim]), vals[dim]))
        elif tag == "PIPE":
            prims.append(Pipe(tuple(vals[:dim]), tuple(vals[dim : 2 * dim]), vals[2 * dim]))
        else:
            raise ValueError(f"unknown primitive tag {tag}")
    return ImplicitDomain(tuple(prims), complement, window)
