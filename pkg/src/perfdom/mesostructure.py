"""Voronoi mesostructure on the interior site process.

Cells are built by iterative bisector clipping of the window box (convex
polygon clipping; no unbounded-region bookkeeping), then queried through
shapely for distances, buffers and facet adjacency.  On top of the cells sit
the weak-neighbor relation, the mesoscopic rings fA_1 ⊂ fA_2 ⊂ fA_3 and the
mesoscopic partition of unity Phi.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.errors import GEOSException
from shapely.geometry import Point, Polygon
from shapely.validation import make_valid

from .geometry import Window

__all__ = [
    "VoronoiMesh",
    "voronoi",
    "neighbor_bound_audit",
    "weak_neighbors",
    "rings",
    "phi_cutoff",
    "partition_Phi",
    "write_cells_csv",
]

DEGENERACY_TOL_FACTOR = 1e-9


def _clip_halfplane(verts: np.ndarray, site: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by the bisector half-plane
    containing ``site``."""
    normal = other - site
    mid = 0.5 * (site + other)
    vals = (verts - mid) @ normal
    if np.all(vals <= 0):
        return verts
    out = []
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        va, vb = vals[i], vals[(i + 1) % n]
        if va <= 0:
            out.append(a)
            if vb > 0:
                out.append(a + (b - a) * (va / (va - vb)))
        elif vb <= 0:
            out.append(a + (b - a) * (va / (va - vb)))
    return np.asarray(out)


@dataclass
class VoronoiMesh:
    sites: np.ndarray
    cells: list                 # shapely Polygons
    diameters: np.ndarray
    adjacency: set              # facet-sharing pairs (i, j), i < j
    clipped: np.ndarray         # cells touching the window boundary
    window: Window
    jittered: list = field(default_factory=list)

    @property
    def delaunay_edges(self) -> np.ndarray:
        """Dual edges of the tessellation (facet adjacency)."""
        return np.array(sorted(self.adjacency), int).reshape(-1, 2)


def voronoi(sites, window: Window, min_separation: float | None = None) -> VoronoiMesh:
    """Voronoi tessellation of the window.

    Each cell starts as the window box and is clipped by the bisector against
    neighboring sites in order of distance, stopping once the next site is too
    far to cut the current cell.  Near-coincident sites (within 1e-9 of the
    window size) receive a deterministic hash-based jitter and are flagged;
    exact duplicates are an error.
    """
    sites = np.atleast_2d(np.asarray(sites, float))
    if sites.shape[1] != 2:
        raise ValueError("voronoi mesh construction is 2D")
    n = len(sites)
    if n == 0:
        raise ValueError("no sites")

    size = float(max(np.asarray(window.hi) - np.asarray(window.lo)))
    tol = DEGENERACY_TOL_FACTOR * size
    jittered = []
    if n > 1:
        tree = cKDTree(sites)
        close = tree.query_pairs(tol, output_type="ndarray")
        for i, j in close:
            if np.all(sites[i] == sites[j]):
                raise ValueError(f"duplicate sites {i} and {j} at {sites[i]}")
            # deterministic jitter so downstream clipping sees distinct bisectors
            h = hashlib.sha256(f"{i},{j}".encode()).digest()
            shift = (np.frombuffer(h[:16], np.uint64).astype(float) / 2**64 - 0.5) * tol
            sites = sites.copy()
            sites[j] = sites[j] + shift
            jittered.append(int(j))
        if min_separation is not None:
            d, _ = tree.query(sites, k=2)
            if np.min(d[:, 1]) < 2 * min_separation * (1 - 1e-12):
                raise ValueError("sites violate the 2r minimum separation")

    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    box = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])

    order_tree = cKDTree(sites)
    cells = []
    diameters = np.empty(n)
    clipped = np.zeros(n, bool)
    for i in range(n):
        verts = box
        k = min(n, 16)
        checked = 0
        while checked < n - 1:
            dists, idx = order_tree.query(sites[i], k=k)
            idx = np.atleast_1d(idx)
            dists = np.atleast_1d(dists)
            for dist, j in zip(dists[checked + 1 :], idx[checked + 1 :]):
                reach = np.max(np.linalg.norm(verts - sites[i], axis=1))
                if dist / 2 > reach:
                    checked = n - 1
                    break
                verts = _clip_halfplane(verts, sites[i], sites[j])
                checked += 1
            else:
                if k >= n:
                    break
                k = min(2 * k, n)
                continue
            break
        diameters[i] = np.max(
            np.linalg.norm(verts[:, None, :] - verts[None, :, :], axis=-1)
        )
        on_edge = np.any((np.abs(verts - lo) < 1e-9) | (np.abs(verts - hi) < 1e-9))
        clipped[i] = bool(on_edge)
        poly = Polygon(verts)
        if not poly.is_valid:
            # degenerate clipping (collinear sites) can leave self-touching
            # rings; repair and keep the dominant component
            poly = make_valid(poly)
            if poly.geom_type != "Polygon":
                parts = [g for g in getattr(poly, "geoms", []) if g.geom_type == "Polygon"]
                poly = max(parts, key=lambda g: g.area) if parts else Polygon(verts).buffer(0)
        cells.append(poly)

    adjacency = set()
    facet_tol = 1e-9 * size
    bound_tree = cKDTree(sites)
    pairs = bound_tree.query_pairs(2 * float(diameters.max()) + facet_tol, output_type="ndarray")
    for i, j in pairs:
        try:
            inter = cells[i].intersection(cells[j])
        except GEOSException:
            # near-degenerate sliver cells can break the exact overlay; snap
            # coordinates to a fine grid and retry
            inter = shapely.set_precision(cells[i], facet_tol).intersection(
                shapely.set_precision(cells[j], facet_tol)
            )
        if inter.length > facet_tol:
            adjacency.add((int(min(i, j)), int(max(i, j))))

    return VoronoiMesh(sites, cells, diameters, adjacency, clipped, window, jittered)


def neighbor_bound_audit(mesh: VoronoiMesh, r: float):
    """Check #I(x_i) = #{j : G_j meets B_r(G_i)} <= (4 d_i / r)^d per cell.

    Boundary-clipped cells are skipped (their diameters are clipping
    artifacts).  Returns (violations, counts, n_skipped)."""
    if r <= 0:
        raise ValueError("r must be positive")
    d = mesh.sites.shape[1]
    tree = cKDTree(mesh.sites)
    violations = []
    counts = np.zeros(len(mesh.sites), int)
    skipped = 0
    for i, cell in enumerate(mesh.cells):
        if mesh.clipped[i]:
            skipped += 1
            continue
        reach = mesh.diameters[i] + r
        cand = tree.query_ball_point(mesh.sites[i], reach + float(mesh.diameters.max()))
        count = 0
        for j in cand:
            if mesh.cells[j].distance(cell) <= r:
                count += 1
        counts[i] = count
        if count > (4 * mesh.diameters[i] / r) ** d:
            violations.append(i)
    return violations, counts, skipped


def weak_neighbors(mesh: VoronoiMesh, r: float) -> set:
    """Pairs i ~~ j with dist(G_i, G_j) < r (the r/2-collars intersect)."""
    if r <= 0:
        raise ValueError("r must be positive")
    tree = cKDTree(mesh.sites)
    reach = 2 * float(mesh.diameters.max()) + r
    out = set()
    for i, j in tree.query_pairs(reach, output_type="ndarray"):
        if mesh.cells[i].distance(mesh.cells[j]) < r * (1 - 1e-12):
            out.add((int(min(i, j)), int(max(i, j))))
    return out


def rings(mesh: VoronoiMesh, i: int, r: float):
    """Mesoscopic rings around cell i: fA_1 = B_{r/2}(G_i),
    fA_2 = B_{2 d_i}(fA_1), fA_3 = B_{2 d_i + r}(fA_2)."""
    di = float(mesh.diameters[i])
    fa1 = mesh.cells[i].buffer(r / 2)
    fa2 = fa1.buffer(2 * di)
    fa3 = fa2.buffer(2 * di + r)
    return fa1, fa2, fa3


def phi_cutoff(dist, r: float):
    """Smoothstep cutoff: 1 on the cell, 0 beyond r/2, slope bounded by 4/r."""
    s = np.clip(2 * np.asarray(dist, float) / r, 0.0, 1.0)
    return 1 - s * s * (3 - 2 * s)


def partition_Phi(mesh: VoronoiMesh, r: float, x, return_support: bool = False):
    """Normalized mesoscopic weights Phi_i(x); zero outside the r/2 collar.

    Since the cells tile the window, some raw weight is always 1 and the
    normalizing sum is >= 1."""
    x = np.asarray(x, float)
    pt = Point(x)
    tree = cKDTree(mesh.sites)
    reach = float(mesh.diameters.max()) + r
    raw = np.zeros(len(mesh.sites))
    idx = tree.query_ball_point(x, reach)
    for i in idx:
        dist = mesh.cells[i].distance(pt)
        if dist < r / 2:
            raw[i] = phi_cutoff(dist, r)
    total = raw.sum()
    if total <= 0:
        raise ValueError(f"point {x} outside every cell collar (outside the window?)")
    weights = raw / total
    if return_support:
        return weights, np.flatnonzero(raw)
    return weights


CELLS_CSV_SCHEMA = "cells/1"


def write_cells_csv(mesh: VoronoiMesh, r: float, path):
    weak = weak_neighbors(mesh, r)
    n_weak = np.zeros(len(mesh.sites), int)
    for i, j in weak:
        n_weak[i] += 1
        n_weak[j] += 1
    n_facet = np.zeros(len(mesh.sites), int)
    for i, j in mesh.adjacency:
        n_facet[i] += 1
        n_facet[j] += 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# schema={CELLS_CSV_SCHEMA}"])
        writer.writerow(["site_x", "site_y", "diameter", "n_facet_neighbors", "n_weak_neighbors", "clipped"])
        for i, site in enumerate(mesh.sites):
            writer.writerow(
                [f"{site[0]:.17g}", f"{site[1]:.17g}", f"{mesh.diameters[i]:.17g}",
                 n_facet[i], n_weak[i], int(mesh.clipped[i])]
            )
