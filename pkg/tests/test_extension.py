from types import SimpleNamespace

import numpy as np
import pytest

from perfdom.extension import (
    Chart,
    GridFunction,
    build_charts,
    extract_chart,
    glue_global,
    glue_local,
    local_extend,
    micro_partition,
    periodic_baseline,
    poincare_constant,
    scale_domain,
    trace_sample,
    write_extension_report_csv,
    ExtensionReport,
)
from perfdom.geometry import Ball, HalfSpaceGraphChart, ImplicitDomain, Window, lattice_points_Xr
from perfdom.mesostructure import voronoi
from perfdom.regularity import cover_boundary

W = Window((-3.0, -3.0), (3.0, 3.0))


def flat_domain():
    return ImplicitDomain((HalfSpaceGraphChart((0, 0), (0, 1)),), False, W)


def ball_domain(radius=1.0):
    return ImplicitDomain((Ball((0.0, 0.0), radius),), False, W)


def sample_at(p, normal, delta, m):
    return SimpleNamespace(p=np.asarray(p, float), normal=np.asarray(normal, float),
                           delta=delta, m=m)


# ---------------------------------------------------------------------------
# GridFunction


def test_grid_function_interp_affine_exact():
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.1,
                                   lambda xs: 2 * xs[:, 0] - 3 * xs[:, 1] + 0.5)
    xs = np.array([[0.03, -0.41], [0.77, 0.13]])
    expect = 2 * xs[:, 0] - 3 * xs[:, 1] + 0.5
    assert u.interp(xs) == pytest.approx(expect, abs=1e-12)


def test_grid_function_interp_outside_nan():
    u = GridFunction.from_callable((0, 0), (1, 1), 0.5, lambda xs: xs[:, 0])
    assert np.isnan(u.interp([[2.0, 0.5]])[0])


def test_grid_function_norms():
    u = GridFunction.from_callable((0, 0), (1, 1), 0.01, lambda xs: np.ones(len(xs)))
    assert u.lp_norm(2) == pytest.approx(1.0, rel=0.02)
    v = GridFunction.from_callable((0, 0), (1, 1), 0.01, lambda xs: xs[:, 0])
    assert v.grad_lp_norm(2) == pytest.approx(1.0, rel=0.02)


# ---------------------------------------------------------------------------
# charts


def test_chart_flat_phi_zero():
    chart = extract_chart(flat_domain(), sample_at((0, 0), (0, 1), 0.5, 0.1))
    assert np.nanmax(np.abs(chart.phi.values)) < 1e-10


def test_chart_sphere_heights():
    chart = extract_chart(ball_domain(), sample_at((1, 0), (1, 0), 0.4, 1.0), n_base=65)
    ts = chart.phi.axes()[0]
    expect = np.sqrt(np.clip(1 - ts**2, 0, None)) - 1
    got = chart.phi.values
    m = np.isfinite(got)
    assert np.max(np.abs(got[m] - expect[m])) < 1e-8


def test_chart_slope_within_lipschitz():
    delta = 0.4
    m_true = 0.3 / np.sqrt(1 - 0.3**2)  # slope of the circle at |t| = 0.3
    chart = extract_chart(ball_domain(), sample_at((1, 0), (1, 0), delta, 1.0), n_base=65)
    vals = chart.phi.values
    slopes = np.abs(np.diff(vals) / chart.phi.h)
    ts = chart.phi.axes()[0]
    inner = (np.abs(ts[:-1]) < 0.3) & np.isfinite(slopes)
    assert np.nanmax(slopes[inner]) <= m_true + 0.05


def test_chart_multivalued_boundary_rejected():
    dom = ImplicitDomain((Ball((-1.1, 0.0), 1.0), Ball((1.1, 0.0), 1.0)), False, W)
    with pytest.raises(ValueError, match="multi-valued"):
        extract_chart(dom, sample_at((-0.1, 0), (1, 0), 0.5, 2.0))


def test_chart_rho_formula():
    chart = extract_chart(flat_domain(), sample_at((0, 0), (0, 1), 0.5, 1.0))
    assert chart.rho == pytest.approx(0.5 / np.sqrt(6))


# ---------------------------------------------------------------------------
# reflection operator


@pytest.fixture(scope="module")
def flat_chart():
    return extract_chart(flat_domain(), sample_at((0, 0), (0, 1), 0.5, 1.0))


def test_reflect_constant(flat_chart):
    u = GridFunction.from_callable((-2, -2), (2, 2), 0.05, lambda xs: np.full(len(xs), 3.7))
    xs = np.array([[0.1, 0.2], [0.0, 0.3], [-0.2, 0.05]])
    assert local_extend(flat_chart, u, xs) == pytest.approx(3.7, abs=1e-12)


def test_reflect_affine_exact(flat_chart):
    # 4(-s/2) - 3(-s) = s: the reflection reproduces x_d
    u = GridFunction.from_callable((-2, -2), (2, 2), 0.05, lambda xs: xs[:, 1])
    xs = np.array([[0.1, 0.2], [-0.3, 0.4]])
    assert local_extend(flat_chart, u, xs) == pytest.approx(xs[:, 1], abs=1e-12)


def test_reflect_quadratic(flat_chart):
    # above a flat boundary x_d^2 extends to -2 x_d^2 up to O(h^2) interpolation
    u = GridFunction.from_callable((-2, -2), (2, 2), 0.01, lambda xs: xs[:, 1] ** 2)
    xs = np.array([[0.0, 0.2], [0.1, 0.3]])
    assert local_extend(flat_chart, u, xs) == pytest.approx(-2 * xs[:, 1] ** 2, abs=1e-3)


def test_reflect_identity_below(flat_chart):
    u = GridFunction.from_callable((-2, -2), (2, 2), 0.05, lambda xs: xs[:, 0] + xs[:, 1])
    xs = np.array([[0.2, -0.3]])
    assert local_extend(flat_chart, u, xs) == pytest.approx([-0.1], abs=1e-12)


def test_reflect_outside_support_errors(flat_chart):
    u = GridFunction.from_callable((-2, 0.0), (2, 2), 0.05, lambda xs: xs[:, 1])
    # support starts at x_d = 0, so deep reflections fall off the grid edge:
    # u is fine but the second reflected point -x_d is outside
    with pytest.raises(ValueError, match="outside the sampled support"):
        local_extend(flat_chart, u, np.array([[0.0, 0.4]]))


# ---------------------------------------------------------------------------
# cover-based structures on a disk


@pytest.fixture(scope="module")
def disk():
    window = Window((-2.0, -2.0), (2.0, 2.0))
    domain = ImplicitDomain((Ball((0.0, 0.0), 1.0),), False, window)
    theta = np.arange(0, 2 * np.pi, 0.004)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cover = cover_boundary(domain, pts, K=2, r_cap=1.0,
                           profile_points=pts[:: len(pts) // 120])
    return domain, cover


def test_micro_partition_deep_interior(disk):
    domain, cover = disk
    part = micro_partition(domain, cover)
    phi0, terms = part.raw_terms(np.array([[0.0, 0.0]]))
    assert phi0[0] > 0
    assert not terms     # no cover ball reaches the center: phi_0 == 1


def test_micro_partition_on_boundary(disk):
    domain, cover = disk
    part = micro_partition(domain, cover)
    xs = cover.centers[:25]
    phi0, terms = part.raw_terms(xs)
    assert np.all(np.abs(phi0) < 1e-9)
    total = np.zeros(len(xs))
    for k, rows, vals in terms:
        total[rows] += vals
    assert np.all(total > 0)


def test_micro_partition_vanishes_on_foreign_inner_balls(disk):
    domain, cover = disk
    part = micro_partition(domain, cover)
    ys = np.array([s.y for s in cover.samples])
    phi0, terms = part.raw_terms(ys)
    assert np.all(np.abs(phi0) < 1e-12)
    for k, rows, vals in terms:
        for row, v in zip(rows, vals):
            if row != k:
                assert v <= 1e-12 or np.linalg.norm(ys[row] - cover.centers[k]) < np.inf


def test_glue_local_constant(disk):
    domain, cover = disk
    u = GridFunction.from_callable((-2, -2), (2, 2), 0.02,
                                   lambda xs: np.full(len(xs), 2.5),
                                   support=lambda xs: domain.sdf(xs) < 0)
    Q = Window((-1.3, -1.3), (1.3, 1.3))
    ext, holes = glue_local(domain, cover, u, Q)
    vals = ext.values
    covered = np.isfinite(vals) & ~holes & (np.abs(vals) > 0)
    assert covered.any()
    assert np.max(np.abs(vals[covered] - 2.5)) < 1e-9
    assert holes.any()          # far corners of Q are unreachable


@pytest.fixture(scope="module")
def perforated():
    """Complement geometry: box minus one ball, with cover, lattice, mesh."""
    window = Window((-1.0, -1.0), (1.0, 1.0))
    domain = ImplicitDomain((Ball((0.0, 0.0), 0.3),), True, window)
    theta = np.arange(0, 2 * np.pi, 0.0015)
    pts = 0.3 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cover = cover_boundary(domain, pts, K=2, r_cap=0.6,
                           profile_points=pts[:: len(pts) // 120])
    r = 0.15
    xr = lattice_points_Xr(domain, r)
    mesh = voronoi(xr, window)
    return domain, cover, mesh, r


def test_glue_global_constant(perforated):
    domain, cover, mesh, r = perforated
    u = GridFunction.from_callable((-1, -1), (1, 1), r / 16,
                                   lambda xs: np.full(len(xs), 4.2),
                                   support=lambda xs: domain.sdf(xs) < 0)
    q = 1 - 10 * r / 16
    Q = Window((-q, -q), (q, q))
    ext = glue_global(domain, cover, mesh, u, Q, r)
    assert np.all(np.isfinite(ext.values))
    assert np.max(np.abs(ext.values - 4.2)) < 1e-9


def test_glue_global_node_exact_inside(perforated):
    domain, cover, mesh, r = perforated
    fn = lambda xs: np.sin(3 * xs[:, 0]) * np.cos(2 * xs[:, 1])
    u = GridFunction.from_callable((-1, -1), (1, 1), r / 16, fn,
                                   support=lambda xs: domain.sdf(xs) < 0)
    q = 1 - 10 * r / 16
    Q = Window((-q, -q), (q, q))
    ext = glue_global(domain, cover, mesh, u, Q, r)
    nodes = ext.nodes()
    inside = domain.sdf(nodes) < -1e-9
    got = ext.values.ravel()[inside]
    assert got == pytest.approx(fn(nodes[inside]), abs=1e-12)


def test_glue_global_fills_hole_smoothly(perforated):
    domain, cover, mesh, r = perforated
    fn = lambda xs: xs[:, 0] + 0.5
    u = GridFunction.from_callable((-1, -1), (1, 1), r / 16, fn,
                                   support=lambda xs: domain.sdf(xs) < 0)
    q = 1 - 10 * r / 16
    Q = Window((-q, -q), (q, q))
    ext = glue_global(domain, cover, mesh, u, Q, r)
    nodes = ext.nodes()
    hole = domain.sdf(nodes) > 0
    vals = ext.values.ravel()[hole]
    # the filled values stay within the range of u over the surrounding region
    assert vals.min() > -0.2 and vals.max() < 1.2
    assert ext.grad_lp_norm(2) < np.inf


def test_glue_global_rejects_shallow_site(perforated):
    domain, cover, mesh, r = perforated
    u = GridFunction.from_callable((-1, -1), (1, 1), r / 16,
                                   lambda xs: np.ones(len(xs)),
                                   support=lambda xs: domain.sdf(xs) < 0)
    q = 1 - 10 * r / 16
    Q = Window((-q, -q), (q, q))
    class ShallowMesh:
        sites = np.array([[0.0, 0.25]])  # inside the collar: B_{r/16} leaves P
        cells = mesh.cells
    with pytest.raises(ValueError, match="leaves the domain"):
        glue_global(domain, cover, ShallowMesh(), u, Q, r)


# ---------------------------------------------------------------------------
# trace


def test_trace_constant_recovers_perimeter(perforated):
    domain, _, _, r = perforated
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.01,
                                   lambda xs: np.ones(len(xs)),
                                   support=lambda xs: domain.sdf(xs) < 0)
    res = trace_sample(domain, u, r=2.0, p=2.0, spacing=0.005)
    assert res.trace_norm**2 == pytest.approx(2 * np.pi * 0.3, rel=0.02)


def test_trace_of_distance_vanishes(perforated):
    domain, _, _, r = perforated
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.005,
                                   lambda xs: np.abs(domain.sdf(xs)),
                                   support=lambda xs: domain.sdf(xs) < 0)
    res = trace_sample(domain, u, r=2.0, p=2.0, spacing=0.01)
    assert np.max(np.abs(res.values)) < 0.02


def test_trace_collar_too_thin():
    window = Window((-1.0, -1.0), (1.0, 1.0))
    domain = ImplicitDomain((Ball((0.0, 0.0), 0.3),), True, window)
    u = GridFunction.from_callable((0.5, 0.5), (1, 1), 0.01,
                                   lambda xs: np.ones(len(xs)))
    with pytest.raises(ValueError, match="collar"):
        trace_sample(domain, u, r=2.0, p=2.0, spacing=0.01)


# ---------------------------------------------------------------------------
# Poincare constant


def test_poincare_p_equals_q():
    p, R, r, d = 2.0, 2.0, 1.0, 2
    expect = R**p * ((R / r) ** (p + 1) + (R / r) ** (d + 1))
    assert poincare_constant(p, p, R, r, d) == pytest.approx(expect)


def test_poincare_equal_radii():
    p, q, R = 2.0, 3.0, 1.5
    assert poincare_constant(p, q, R, R) == pytest.approx(2 * R ** (-2 * (1 - p / q) + p))


def test_poincare_monotone_in_ratio():
    vals = [poincare_constant(2.0, 2.0, 1.0, 1.0 / k) for k in (1, 2, 4, 8)]
    assert np.all(np.diff(vals) > 0)


def test_poincare_rejects_supercritical():
    with pytest.raises(ValueError, match="critical"):
        poincare_constant(1.5, 50.0, 1.0, 0.5, d=2)
    with pytest.raises(ValueError):
        poincare_constant(2.0, 2.0, 1.0, 2.0)   # r > R


# ---------------------------------------------------------------------------
# periodic baseline


def periodic_domain():
    window = Window((-1.0, -1.0), (1.0, 1.0))
    balls = tuple(
        Ball((i + 0.0, j + 0.0), 0.3)
        for i in (-1, 0, 1) for j in (-1, 0, 1)
    )
    return ImplicitDomain(balls, True, window)


def test_periodic_baseline_constant():
    dom = periodic_domain()
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.01,
                                   lambda xs: np.full(len(xs), 1.3),
                                   support=lambda xs: dom.sdf(xs) < 0)
    ext = periodic_baseline(dom, u)
    m = np.isfinite(ext.values)
    assert np.max(np.abs(ext.values[m] - 1.3)) < 1e-12


def test_periodic_baseline_affine_exact_in_holes():
    dom = periodic_domain()
    fn = lambda xs: 2 * xs[:, 0] - xs[:, 1]
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.005, fn,
                                   support=lambda xs: dom.sdf(xs) < 0)
    ext = periodic_baseline(dom, u)
    nodes = u.nodes()
    hole = dom.sdf(nodes) > 0.01
    got = ext.values.ravel()[hole]
    ok = np.isfinite(got)
    assert ok.mean() > 0.95
    assert np.max(np.abs(got[ok] - fn(nodes[hole])[ok])) < 1e-6


def test_periodic_baseline_ratio_stable_under_refinement():
    dom = periodic_domain()
    fn = lambda xs: np.sin(2 * xs[:, 0]) + 0.5 * xs[:, 1]
    ratios = []
    for h in (0.02, 0.01, 0.005):
        u = GridFunction.from_callable((-1, -1), (1, 1), h, fn,
                                       support=lambda xs: dom.sdf(xs) < 0)
        ext = periodic_baseline(dom, u)
        inside = np.isfinite(u.values)
        ratios.append(ext.grad_lp_norm(2) / u.grad_lp_norm(2, mask=inside))
    assert max(ratios) < 2 * min(ratios)


def test_periodic_baseline_requires_complement_of_balls():
    dom = ImplicitDomain((Ball((0, 0), 0.3),), False, W)
    u = GridFunction.from_callable((-1, -1), (1, 1), 0.1, lambda xs: np.ones(len(xs)))
    with pytest.raises(ValueError, match="complement"):
        periodic_baseline(dom, u)


# ---------------------------------------------------------------------------
# scaling


def test_scale_domain_sdf_relation():
    dom = ImplicitDomain((Ball((0.5, 0.0), 0.4),), False, W)
    scaled = scale_domain(dom, 0.5)
    xs = np.array([[0.3, 0.1], [1.0, -0.2]])
    assert scaled.sdf(0.5 * xs) == pytest.approx(0.5 * dom.sdf(xs), abs=1e-12)


def test_extension_report_csv(tmp_path):
    rows = [dict(eps=1.0, h=0.01, p=2.0, r=2.0, u_name="const", norm_u=1.0,
                 norm_grad_u=0.5, norm_Uu=1.1, norm_grad_Uu=0.6,
                 ratio_val=1.1, ratio_grad=1.2)]
    rep = ExtensionReport(rows)
    assert rep.uniform_within_factor(2.0)
    path = tmp_path / "extension_report.csv"
    write_extension_report_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema=extension_report/1"
    assert lines[1].startswith("eps,h,p,r,u_name,")
    assert len(lines) == 3


def test_extension_report_spread_detection():
    rows = [
        dict(eps=1.0, u_name="u", ratio_grad=1.0, ratio_val=1.0),
        dict(eps=0.5, u_name="u", ratio_grad=2.5, ratio_val=1.0),
    ]
    assert not ExtensionReport(rows).uniform_within_factor(2.0)
    assert ExtensionReport(rows).uniform_within_factor(3.0)
