import math

import numpy as np
import pytest

from cone_walker.asymptotics import (
    cone_exponent,
    decorrelated_setup,
    fit_exponent,
    quadrant_boundary_point,
    unconstrained_baseline,
    verify_boundary_llt,
    verify_harmonicity_V,
    verify_interior_llt,
    verify_llt_exponent,
    verify_survival_exponent,
    verify_uniform_lower_bound,
)
from cone_walker.cone_geometry import FullSpace, HalfSpace, Orthant, Polyhedral, Wedge2D
from cone_walker.errors import EmptyGrid, MixedResidueError, NonPositiveValue
from cone_walker.walk_model import diagonal_walk, in_step_class, lazy_walk, nsew_walk, simple_walk_1d


def test_fit_pure_power():
    ns = np.arange(10, 1000)
    fit = fit_exponent(ns, ns**-1.0)
    assert abs(fit.slope + 1) < 1e-12
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_with_correction():
    ns = np.arange(256, 4097)
    fit = fit_exponent(ns, (1 + 5 / ns) / ns, window=(256, 4096))
    assert -1.02 < fit.slope < -1.0


def test_fit_constant():
    assert fit_exponent([1, 2, 4, 8], [3.0] * 4).slope == pytest.approx(0.0, abs=1e-14)


def test_fit_errors():
    with pytest.raises(MixedResidueError):
        fit_exponent([2, 3, 4, 5], [1.0, 1.0, 1.0, 1.0], period=2)
    with pytest.raises(NonPositiveValue):
        fit_exponent([2, 4, 6], [1.0, 0.0, 1.0])
    fit = fit_exponent([2, 3, 4, 5, 6], [1 / 2, 9.0, 1 / 4, 9.0, 1 / 6], period=2, residue=0)
    assert fit.slope == pytest.approx(-1.0)


def test_cone_exponents():
    assert cone_exponent(FullSpace(2)) == 0.0
    assert cone_exponent(Orthant(2)) == 2.0
    assert cone_exponent(Polyhedral(((1.0, 0.0), (0.0, 1.0)))) == pytest.approx(2.0)
    a = math.pi / 3
    wedge_normals = Wedge2D(a).normals()
    assert cone_exponent(Polyhedral(tuple(map(tuple, wedge_normals)))) == pytest.approx(3.0)


def test_decorrelated_setup_keeps_quadrant():
    m, dcone, u, p = decorrelated_setup(lazy_walk(), Orthant(2))
    assert m.scalar() == pytest.approx(math.sqrt(2.5))
    assert dcone == Orthant(2) and u is not None and p == 2.0


def test_halfline_survival_exponent():
    check = verify_survival_exponent(simple_walk_1d(), HalfSpace((1.0,)), (1,), (256, 8192), tolerance=0.03)
    assert check.passed
    assert all(n % 2 == 0 for n, _ in check.series)


def test_halfplane_survival_exponent():
    check = verify_survival_exponent(lazy_walk(), HalfSpace((0.0, 1.0)), (0, 1), (128, 2048), tolerance=0.05)
    assert abs(check.fit.slope + 0.5) <= 0.05


def test_free_llt_control():
    check = verify_llt_exponent(nsew_walk(), FullSpace(2), (0, 0), (64, 1024))
    assert abs(check.fit.slope + 1.0) < 0.02


def test_interior_grid_and_flatness():
    rep = verify_interior_llt(lazy_walk(), Orthant(2), (1, 1), 200)
    assert rep.grid_size > 20
    assert rep.kappa_estimate > 0
    assert rep.ratio_spread < 0.15


def test_interior_empty_grid():
    with pytest.raises(EmptyGrid):
        verify_interior_llt(lazy_walk(), Orthant(2), (1, 1), 50, A=0.1)


def test_interior_boundary_consistency():
    """For deep-interior ``y`` the entrance functional is ``u(y/sqrt n)`` and both predictions coincide."""
    cal = verify_interior_llt(lazy_walk(), Orthant(2), (1, 1), 400)
    ys = [(12, 12), (9, 14), (15, 8)]
    for y in ys:
        rep = verify_boundary_llt(lazy_walk(), Orthant(2), (1, 1), [400], cal, ys={400: y}, mc_samples=1000)
        assert abs(rep.ratios[400] - 1) < 0.05


def test_quadrant_boundary_point_class():
    for model in (lazy_walk(), diagonal_walk(), nsew_walk()):
        for n in (100, 101, 400):
            if model == diagonal_walk() and n % 2:
                # the first coordinate changes parity every step
                with pytest.raises(EmptyGrid):
                    quadrant_boundary_point(model, (1, 1), n)
                continue
            y = quadrant_boundary_point(model, (1, 1), n)
            assert y[0] == 1
            assert in_step_class(model, (y[0] - 1, y[1] - 1), n)
            assert abs(y[1] - math.sqrt(n)) <= 2


def test_harmonicity_exact_cases():
    assert verify_harmonicity_V(simple_walk_1d(), HalfSpace((1.0,)), [(1,), (2,), (5,)], 64).max_defect < 1e-12
    assert verify_harmonicity_V(nsew_walk(), Orthant(2), [(1, 1), (2, 3)], 64).max_defect < 1e-12


def test_uniform_lower_bound_floor():
    rep = verify_uniform_lower_bound(lazy_walk(), Orthant(2), [(1, 50)], [64, 256, 1024], 20_000, seed=0)
    assert rep.minimum > 0.01
    deep = verify_uniform_lower_bound(lazy_walk(), Orthant(2), [(30, 30)], [64, 256], 5_000, seed=0)
    assert deep.minimum > rep.minimum


def test_uniform_lower_bound_ratio_band():
    """Consecutive normalised survivals stay within a factor [0.5, 2]."""
    rep = verify_uniform_lower_bound(lazy_walk(), Orthant(2), [(1, 50)], [64, 256, 1024], 20_000, seed=0)
    assert all(0.5 <= r <= 2.0 for r in rep.consecutive_ratios), rep.consecutive_ratios


@pytest.mark.parametrize("model", [lazy_walk(), diagonal_walk(), nsew_walk()], ids=["lazy", "diag", "nsew"])
def test_unconstrained_baseline(model):
    check = unconstrained_baseline(model, 1000)
    assert check.relative_error < 0.02


def test_baseline_wrong_parity_is_zero():
    check = unconstrained_baseline(nsew_walk(), 999)
    assert check.exact == 0.0
