import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from cone_walker.brownian_reference import (
    KernelEvaluator,
    apex_ball_volume,
    ball_cone_volume,
    chapman_kolmogorov_defect,
    check_gaussian_bounds,
    fit_asymptotic_constants,
    halfline_kernel,
    halfline_survival,
    halfspace_kernel,
    integrate_kernel,
    mc_bridge_survival,
    mc_brownian_survival,
    orthant_kernel,
    orthant_survival,
    wedge_kernel,
    wedge_normalization,
    wedge_survival,
    weyl_kernel,
    weyl_survival,
)
from cone_walker.cone_geometry import HalfSpace, Orthant, Polyhedral, Wedge2D, WeylChamberA
from cone_walker.errors import NoClosedForm, SeriesNotConverged
from cone_walker.reduite import reduite_for

CONES = [HalfSpace((0.0, 1.0)), Orthant(2), Orthant(3), Wedge2D(2 * math.pi / 3), Wedge2D(math.pi / 3, 0.5),
         WeylChamberA(2), WeylChamberA(3)]
CONE_IDS = ["half", "quad", "oct", "wedge120", "wedge60", "weyl2", "weyl3"]


def test_halfline_example():
    expected = (1 - math.exp(-2)) / math.sqrt(2 * math.pi)
    assert halfline_kernel(1.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-14)
    mc = mc_bridge_survival(HalfSpace((1.0,)), (1.0,), (1.0,), 1.0, 100_000, seed=1)
    gauss = 1 / math.sqrt(2 * math.pi)
    assert abs(mc.mean * gauss - expected) <= 3 * mc.std_error * gauss


def test_boundary_value_is_zero():
    assert halfline_kernel(1.0, 0.0, 2.0) == 0.0
    assert KernelEvaluator(Orthant(2)).kernel((1, 1), (0.0, 2.0), 1.0) == 0.0
    val, _ = wedge_kernel(2.0, (1.0, 0.7), (1.5, 0.0), 1.0)
    assert abs(val[0]) < 1e-15
    val, _ = wedge_kernel(2.0, (1.0, 0.7), (1.5, 2.0), 1.0)
    assert abs(val[0]) < 1e-14


def test_far_from_boundary_is_free_kernel():
    x = np.array([1e3, 1e3])
    assert KernelEvaluator(Orthant(2)).kernel(x, x, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


def test_orthant_survival_example():
    exact = special.erf(1 / math.sqrt(2)) ** 2
    assert orthant_survival(np.array([[1.0, 1.0]]), 1.0)[0] == pytest.approx(exact, rel=1e-14)
    assert orthant_survival(np.array([[1e3, 1e3]]), 1.0)[0] == 1.0
    mc = mc_brownian_survival(Orthant(2), (1.0, 1.0), 1.0, 10**6, seed=2)
    assert abs(mc.mean - exact) <= 3 * mc.std_error


def test_halfspace_mc_survival():
    mc = mc_brownian_survival(HalfSpace((0.0, 1.0)), (0.3, 0.5), 1.0, 200_000, seed=3)
    assert abs(mc.mean - halfline_survival(0.5, 1.0)) <= 3 * mc.std_error


def test_wedge_survival_mc():
    """Series survival against grid Brownian motion at a right angle, where the crossing weight is exact."""
    cone = Wedge2D(math.pi / 2)
    x = np.array([0.8, 0.5])
    r, th = cone.polar(x)
    exact = wedge_survival(cone.beta, (r, th), 1.0)[0][0]
    mc = mc_brownian_survival(cone, x, 1.0, 200_000, seed=4)
    assert abs(mc.mean - exact) <= 3 * mc.std_error


def test_wedge_at_pi_matches_halfplane():
    rng = np.random.default_rng(0)
    r = rng.uniform(0.1, 4, 100)
    th = rng.uniform(0.01, math.pi - 0.01, 100)
    rho = rng.uniform(0.1, 4, 100)
    ph = rng.uniform(0.01, math.pi - 0.01, 100)
    t = rng.uniform(0.5, 3, 100)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    y = np.column_stack([rho * np.cos(ph), rho * np.sin(ph)])
    for k in range(100):
        w, _ = wedge_kernel(math.pi, (r[k], th[k]), (rho[k], ph[k]), t[k])
        assert abs(w[0] - halfspace_kernel(x[k], y[k], t[k], (0.0, 1.0))) < 1e-8
        s, _ = wedge_survival(math.pi, (r[k], th[k]), t[k])
        assert abs(s[0] - halfline_survival(x[k, 1], t[k])) < 1e-8


def test_wedge_at_right_angle_matches_orthant():
    rng = np.random.default_rng(1)
    pts = Orthant(2).sample(rng, 200, radius=4.0)
    x, y = pts[:100], pts[100:]
    t = rng.uniform(0.5, 3, 100)
    cone = Wedge2D(math.pi / 2)
    for k in range(100):
        w, _ = wedge_kernel(cone.beta, cone.polar(x[k]), cone.polar(y[k]), t[k])
        assert abs(w[0] - orthant_kernel(x[k], y[k], t[k])) < 1e-8
        s, _ = wedge_survival(cone.beta, cone.polar(x[k]), t[k])
        assert abs(s[0] - orthant_survival(x[k][None, :], t[k])[0]) < 1e-8


def test_wedge_normalization_is_one():
    assert wedge_normalization() == pytest.approx(1.0, abs=1e-12)


def test_series_not_converged():
    with pytest.raises(SeriesNotConverged):
        wedge_kernel(math.pi / 8, (30.0, 0.2), (30.0, 0.2), 0.01, terms=5)


def test_weyl_d2_against_halfspace():
    """The chamber ``x1 < x2`` is the half-plane with normal ``(-1, 1)/sqrt 2``."""
    rng = np.random.default_rng(2)
    pts = WeylChamberA(2).sample(rng, 40, radius=3.0)
    h = HalfSpace((-1.0, 1.0))
    for x, y in zip(pts[:20], pts[20:]):
        assert weyl_kernel(x, y, 1.3) == pytest.approx(halfspace_kernel(x, y, 1.3, h.normal), rel=1e-10, abs=1e-14)
    assert weyl_survival(pts, 1.3) == pytest.approx(halfline_survival(pts @ np.array(h.normal), 1.3), rel=1e-12)


def test_weyl_survival_high_dim_unavailable():
    with pytest.raises(NoClosedForm):
        weyl_survival(np.array([[0.0, 1.0, 2.0]]), 1.0)


def test_polyhedral_has_no_kernel():
    with pytest.raises(NoClosedForm):
        KernelEvaluator(Polyhedral(((1.0, 0.3), (0.2, 1.0)))).kernel((1, 1), (2, 2), 1.0)


def test_chapman_kolmogorov():
    assert chapman_kolmogorov_defect(0.7, 1.3, 0.4, 0.9) < 1e-10


@pytest.mark.parametrize("cone", [HalfSpace((0.0, 1.0)), Orthant(2), Orthant(3), Wedge2D(2 * math.pi / 3)],
                         ids=["half", "quad", "oct", "wedge120"])
def test_kernel_integrates_to_survival(cone):
    ev = KernelEvaluator(cone)
    x = cone.sample(np.random.default_rng(5), 1, radius=2.0, min_dist=0.1)[0]
    assert integrate_kernel(ev, x, 1.0) == pytest.approx(ev.survival(x, 1.0), abs=1e-8)


@pytest.mark.parametrize("cone", CONES, ids=CONE_IDS)
def test_kernel_symmetry_and_sign(cone):
    ev = KernelEvaluator(cone)
    rng = np.random.default_rng(6)
    pts = cone.sample(rng, 60, radius=3.0)
    for x, y in zip(pts[:30], pts[30:]):
        a, b = ev.kernel(x, y, 1.7), ev.kernel(y, x, 1.7)
        assert a >= 0
        assert abs(a - b) < 1e-10


@pytest.mark.parametrize("cone", CONES, ids=CONE_IDS)
def test_scaling_identities(cone):
    """``K_t(x,y) = t^(-d/2) K_1(x/sqrt t, y/sqrt t)`` and ``k_t(x) = k_1(x/sqrt t)``."""
    ev = KernelEvaluator(cone)
    rng = np.random.default_rng(7)
    pts = cone.sample(rng, 40, radius=3.0)
    d = cone.dim
    for x, y in zip(pts[:20], pts[20:]):
        t = float(rng.uniform(0.2, 5.0))
        s = math.sqrt(t)
        assert abs(ev.kernel(x, y, t) - t ** (-d / 2) * ev.kernel(x / s, y / s, 1.0)) < 1e-10
        if not isinstance(cone, WeylChamberA) or d == 2:
            assert abs(ev.survival(x, t) - ev.survival(x / s, 1.0)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.floats(0.1, 10.0))
def test_halfline_kernel_properties(x, y, t):
    a, b = halfline_kernel(x, y, t), halfline_kernel(y, x, t)
    assert a >= 0
    assert abs(a - b) <= 1e-15
    assert 0 <= halfline_survival(x, t) <= 1


def test_chi_halfline():
    c = fit_asymptotic_constants(HalfSpace((1.0,)))
    assert abs(c.chi / math.sqrt(2 / math.pi) - 1) < 0.005


def test_chi_orthant():
    c = fit_asymptotic_constants(Orthant(2))
    assert abs(c.chi / (2 / math.pi) - 1) < 0.005
    assert c.chi0 > 0


def test_ball_volumes():
    assert ball_cone_volume(HalfSpace((0.0, 1.0)), (0.0, 0.0), 1.0) == pytest.approx(math.pi / 2)
    assert ball_cone_volume(Orthant(2), (0.0, 0.0), 2.0) == pytest.approx(math.pi)
    assert ball_cone_volume(Orthant(2), (5.0, 5.0), 1.0) == pytest.approx(math.pi)
    assert ball_cone_volume(HalfSpace((0.0, 0.0, 1.0)), (0.0, 0.0, 0.0), 1.0) == pytest.approx(2 * math.pi / 3)
    assert apex_ball_volume(Wedge2D(2 * math.pi / 3)) == pytest.approx(math.pi / 3)
    rng = np.random.default_rng(8)
    cone = Wedge2D(2 * math.pi / 3)
    z = np.array([0.3, 0.4])
    pts = z + rng.uniform(-1, 1, size=(400_000, 2))
    hit = (np.linalg.norm(pts - z, axis=1) < 1) & cone.contains_many(pts)
    est = 4 * hit.mean()
    se = 4 * hit.std() / math.sqrt(len(pts))
    assert abs(ball_cone_volume(cone, z, 1.0) - est) <= 4 * se


@pytest.mark.parametrize(
    "cone", [HalfSpace((0.0, 1.0)), Orthant(2), Wedge2D(2 * math.pi / 3), WeylChamberA(2)],
    ids=["half", "quad", "wedge120", "weyl2"],
)
def test_gaussian_bound_suite(cone):
    rep = check_gaussian_bounds(cone, samples=150, seed=1, times=(1.0, 10.0, 100.0))
    assert rep.passed()
    assert 0 < rep.C3 <= 2.0 <= rep.c3
    assert all(v < 10 for v in rep.stability().values())


def test_suite_reports_ball_constant_for_orthant():
    rep = check_gaussian_bounds(Orthant(2), samples=80, seed=2)
    assert rep.ball_constant >= rep.ball_reference * (1 - 1e-9)
    assert rep.ball_reference == pytest.approx(apex_ball_volume(Orthant(2)))
    lo, hi = rep.scaling_ratio_range
    assert 0 < lo <= hi <= 1


def test_reduite_matches_kernel_decay():
    """``k_t(x) t^(p/2)`` tends to a constant multiple of ``u(x)`` for the 120 degree wedge."""
    cone = Wedge2D(2 * math.pi / 3)
    u = reduite_for(cone)
    ev = KernelEvaluator(cone)
    pts = cone.sample(np.random.default_rng(9), 5, radius=1.0, min_dist=0.05)
    t = 1e6
    ratios = [ev.survival(x, t) * t ** (u.p / 2) / u(x) for x in pts]
    assert max(ratios) / min(ratios) < 1.001
