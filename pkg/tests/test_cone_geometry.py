import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from cone_walker.cone_geometry import (
    FullSpace,
    HalfSpace,
    Orthant,
    Polyhedral,
    ShrunkenConeQuery,
    Wedge2D,
    WeylChamberA,
    cone_from_dict,
    in_shrunken,
    load_cone,
    push_inside,
    transform_cone,
)
from cone_walker.errors import ConeError, DimensionMismatch, PointOutsideCone, UnsupportedTransform
from cone_walker.walk_model import LinearTransform

CATALOG = [
    HalfSpace((0.0, 1.0)),
    HalfSpace((1.0, 1.0, 1.0)),
    Wedge2D(math.pi / 2),
    Wedge2D(2 * math.pi / 3, 0.3),
    Wedge2D(math.pi / 5, -1.0),
    Orthant(2),
    Orthant(3),
    WeylChamberA(2),
    WeylChamberA(3),
    Polyhedral(((1.0, 0.2, 0.0), (0.0, 1.0, 0.3), (0.1, 0.0, 1.0))),
]


def test_contains_examples():
    assert Orthant(2).contains((1, 1))
    assert not Orthant(2).contains((1, 0))
    assert not Wedge2D(math.pi / 2).contains((-1, 1))


def test_dist_examples():
    assert Orthant(2).dist_boundary((3, 5)) == 3
    assert HalfSpace((0, 0, 1)).dist_boundary((0, 0, 7)) == 7
    p = (2 * math.cos(math.pi / 4), 2 * math.sin(math.pi / 4))
    assert Wedge2D(math.pi / 2).dist_boundary(p) == pytest.approx(math.sqrt(2), abs=1e-14)


def test_dist_outside_raises():
    with pytest.raises(PointOutsideCone):
        Orthant(2).dist_boundary((0, 3))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        Orthant(2).contains((1, 1, 1))


def test_shrunken_examples():
    q = ShrunkenConeQuery(100, 0.1)
    assert q.threshold == pytest.approx(100**0.4)
    assert in_shrunken(Orthant(2), (10, 10), q)
    assert not in_shrunken(Orthant(2), (5, 20), q)
    one = ShrunkenConeQuery(1, 0.25)
    assert one.threshold == 1.0
    assert in_shrunken(Orthant(2), (1, 4), one)
    assert not in_shrunken(Orthant(2), (0.5, 4), one)


def test_shrunken_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        ShrunkenConeQuery(10, 0.5)


def test_transform_scalar_fixes_cone():
    assert transform_cone(Orthant(2), LinearTransform(math.sqrt(2.5) * np.eye(2))) == Orthant(2)


def test_transform_rotation():
    a = math.pi / 4
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    image = transform_cone(Orthant(2), LinearTransform(rot))
    assert isinstance(image, Polyhedral)
    wedge = Wedge2D(math.pi / 2, math.pi / 4)
    pts = np.random.default_rng(1).normal(size=(500, 2))
    assert np.array_equal(image.contains_many(pts), wedge.contains_many(pts))


def test_transform_halfspace():
    m = np.array([[2.0, 1.0], [0.0, 1.0]])
    image = transform_cone(HalfSpace((0.0, 1.0)), LinearTransform(m))
    assert isinstance(image, HalfSpace)
    pts = np.random.default_rng(2).normal(size=(200, 2))
    assert np.array_equal(image.contains_many(pts @ m.T), HalfSpace((0.0, 1.0)).contains_many(pts))


def test_transform_weyl_unsupported():
    with pytest.raises(UnsupportedTransform):
        transform_cone(WeylChamberA(2), LinearTransform(np.array([[1.0, 0.5], [0.0, 1.0]])))


def test_wedge_rejects_reflex_opening():
    with pytest.raises(ConeError):
        Wedge2D(1.5 * math.pi)


def test_polyhedral_empty_interior():
    with pytest.raises(ConeError):
        Polyhedral(((1.0, 0.0), (-1.0, 0.0)))


def test_cone_dict_roundtrip(tmp_path):
    for cone in CATALOG + [FullSpace(2)]:
        assert cone_from_dict(cone.to_dict()).to_dict() == cone.to_dict()
    path = tmp_path / "c.json"
    path.write_text('{"variant": "wedge2d", "beta": 2.0943951023931953}')
    assert load_cone(path) == Wedge2D(2 * math.pi / 3)
    with pytest.raises(ConeError):
        cone_from_dict({"variant": "torus"})


def test_push_inside():
    x = push_inside(Orthant(2), (0.0, 5.0), 2.0)
    assert Orthant(2).dist_boundary(x) >= 0.5 * Orthant(2).dist_boundary(Orthant(2).center_direction()) * 2.0
    assert np.linalg.norm(x - np.array([0.0, 5.0])) <= 2.0 + 1e-12


def _face_distance(cone, x):
    """Distance from ``x`` to the boundary by minimising over each closed facet."""
    normals = cone.normals()
    best = math.inf
    for i, n in enumerate(normals):
        others = [m for j, m in enumerate(normals) if j != i]
        cons = [{"type": "eq", "fun": lambda b, n=n: n @ b}]
        cons += [{"type": "ineq", "fun": lambda b, m=m: m @ b} for m in others]
        start = x - (n @ x) * n
        res = minimize(lambda b: np.sum((b - x) ** 2), start, jac=lambda b: 2 * (b - x),
                       constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 200})
        best = min(best, math.sqrt(res.fun))
    return best


@pytest.mark.parametrize("cone", CATALOG, ids=lambda c: type(c).__name__ + str(c.dim))
def test_dist_matches_face_projection(cone):
    rng = np.random.default_rng(7)
    pts = cone.sample(rng, 40, radius=3.0, min_dist=1e-3)
    fast = cone.dist_many(pts)
    slow = np.array([_face_distance(cone, x) for x in pts])
    assert np.allclose(fast, slow, atol=1e-6)


coords = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(CATALOG), st.data(), st.floats(1e-3, 1e3))
def test_scale_invariance(cone, data, t):
    x = np.array(data.draw(st.lists(coords, min_size=cone.dim, max_size=cone.dim)))
    margin = cone.margins(x[None, :]).min()
    if abs(margin) < 1e-6 * (1 + np.linalg.norm(x)):
        return
    assert cone.contains(x) == cone.contains(t * x)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(0, 10**6), st.floats(1e-2, 1e2))
def test_distance_homogeneous(cone, seed, t):
    x = cone.sample(np.random.default_rng(seed), 1, radius=5.0, min_dist=1e-3)[0]
    assert cone.dist_boundary(t * x) == pytest.approx(t * cone.dist_boundary(x), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(0, 10**6))
def test_midpoint_convexity(cone, seed):
    x, y = cone.sample(np.random.default_rng(seed), 2, radius=5.0)
    assert cone.contains_closed((x + y) / 2)
