"""Convex cones: membership, boundary distance, shrunken cones.

Cones are OPEN.  A lattice point lying exactly on the boundary is outside,
so a walk landing there has exited.  Every catalog cone except
:class:`FullSpace` is an intersection of half-spaces ``<n_i, x> > 0`` with
unit inward normals ``n_i``; the distance from an interior point to the
boundary is then ``min_i <n_i, x>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConeError, DimensionMismatch, PointOutsideCone, UnsupportedTransform
from .walk_model import LinearTransform

# relative slack used to treat float points on a facet as boundary points
BOUNDARY_TOL = 1e-12


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConeError("zero normal vector")
    # already-unit input is kept bit-for-bit so serialisation round-trips
    return v if abs(n - 1.0) <= 4e-16 else v / n


class ConeSpec:
    """Base class; subclasses are frozen dataclasses."""

    dim: int

    # -- overridden -----------------------------------------------------
    def normals(self) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # -- vectorised queries ----------------------------------------------
    def margins(self, points) -> np.ndarray:
        """``<n_i, x>`` for every point (rows) and facet (columns)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normals().T

    def contains_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points))
        if pts.shape[1] != self.dim:
            raise DimensionMismatch(f"points of dimension {pts.shape[1]} for a {self.dim}-dim cone")
        m = self.margins(pts).min(axis=1)
        scale = 1.0 + np.linalg.norm(pts.astype(float), axis=1)
        return m > BOUNDARY_TOL * scale

    def contains_closed_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points))
        m = self.margins(pts).min(axis=1)
        scale = 1.0 + np.linalg.norm(pts.astype(float), axis=1)
        return m >= -BOUNDARY_TOL * scale

    def dist_many(self, points) -> np.ndarray:
        """Distance to the boundary; negative values flag points outside."""
        return self.margins(points).min(axis=1)

    # -- scalar queries ---------------------------------------------------
    def _check_dim(self, point) -> np.ndarray:
        x = np.asarray(point, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"point of dimension {x.shape[0]} for a {self.dim}-dim cone")
        return x

    def contains(self, point) -> bool:
        return bool(self.contains_many(self._check_dim(point)[None, :])[0])

    def contains_closed(self, point) -> bool:
        return bool(self.contains_closed_many(self._check_dim(point)[None, :])[0])

    def dist_boundary(self, point) -> float:
        x = self._check_dim(point)
        if not self.contains(x):
            raise PointOutsideCone(f"{tuple(x)} is not in the open cone")
        return float(self.dist_many(x[None, :])[0])

    def center_direction(self) -> np.ndarray:
        """Unit vector of a central ray, used to push points off the boundary."""
        n = self.normals()
        return _unit(n.sum(axis=0))

    def sample(self, rng: np.random.Generator, size: int, radius: float = 1.0, min_dist: float = 0.0) -> np.ndarray:
        """Uniform points of ``K`` inside the ball of given radius (rejection)."""
        out = []
        have = 0
        while have < size:
            batch = rng.normal(size=(4 * size + 16, self.dim))
            batch /= np.linalg.norm(batch, axis=1)[:, None]
            batch *= radius * rng.random(len(batch))[:, None] ** (1.0 / self.dim)
            keep = batch[self.contains_many(batch) & (self.dist_many(batch) >= min_dist)]
            out.append(keep)
            have += len(keep)
        return np.concatenate(out)[:size]

    def apex_volume_fraction(self) -> float | None:
        """Fraction of the unit ball lying in ``K`` when known in closed form."""
        return None


@dataclass(frozen=True)
class HalfSpace(ConeSpec):
    normal: tuple

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(c) for c in _unit(self.normal)))

    @property
    def dim(self) -> int:
        return len(self.normal)

    def normals(self):
        return np.array([self.normal])

    def center_direction(self):
        return np.array(self.normal)

    def apex_volume_fraction(self):
        return 0.5

    def to_dict(self):
        return {"variant": "halfspace", "normal": list(self.normal)}


@dataclass(frozen=True)
class Wedge2D(ConeSpec):
    """``{(r cos t, r sin t): base < t < base + beta}`` with ``beta <= pi``."""

    beta: float
    base: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.beta < 2 * math.pi:
            raise ConeError(f"opening {self.beta} not in (0, 2pi)")
        if self.beta > math.pi + 1e-15:
            raise ConeError(f"opening {self.beta} > pi gives a non-convex wedge")

    @property
    def dim(self) -> int:
        return 2

    def normals(self):
        a, b = self.base, self.base + self.beta
        return np.array([[-math.sin(a), math.cos(a)], [math.sin(b), -math.cos(b)]])

    def center_direction(self):
        c = self.base + self.beta / 2
        return np.array([math.cos(c), math.sin(c)])

    def polar(self, point) -> tuple[float, float]:
        """Radius and angle measured from the base ray."""
        x, y = np.asarray(point, dtype=float)
        return math.hypot(x, y), math.atan2(y, x) - self.base

    def polar_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c, s = math.cos(self.base), math.sin(self.base)
        x = c * pts[:, 0] + s * pts[:, 1]
        y = -s * pts[:, 0] + c * pts[:, 1]
        return np.hypot(x, y), np.arctan2(y, x)

    def apex_volume_fraction(self):
        return self.beta / (2 * math.pi)

    def to_dict(self):
        return {"variant": "wedge2d", "beta": self.beta, "base": self.base}


@dataclass(frozen=True)
class Orthant(ConeSpec):
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConeError("orthant dimension must be positive")

    @property
    def dim(self) -> int:
        return self.d

    def normals(self):
        return np.eye(self.d)

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points))
        if pts.shape[1] != self.d:
            raise DimensionMismatch(f"points of dimension {pts.shape[1]} for a {self.d}-dim cone")
        if np.issubdtype(pts.dtype, np.integer):
            return (pts > 0).all(axis=1)
        return super().contains_many(pts)

    def apex_volume_fraction(self):
        return 0.5 ** self.d

    def to_dict(self):
        return {"variant": "orthant", "dim": self.d}


@dataclass(frozen=True)
class WeylChamberA(ConeSpec):
    """``{x_1 < x_2 < ... < x_d}``."""

    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ConeError("Weyl chamber needs d >= 2")

    @property
    def dim(self) -> int:
        return self.d

    def normals(self):
        n = np.zeros((self.d - 1, self.d))
        for i in range(self.d - 1):
            n[i, i], n[i, i + 1] = -1.0, 1.0
        return n / math.sqrt(2.0)

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points))
        if pts.shape[1] != self.d:
            raise DimensionMismatch(f"points of dimension {pts.shape[1]} for a {self.d}-dim cone")
        if np.issubdtype(pts.dtype, np.integer):
            return (np.diff(pts, axis=1) > 0).all(axis=1)
        return super().contains_many(pts)

    def center_direction(self):
        return _unit(np.arange(self.d) - (self.d - 1) / 2)

    def apex_volume_fraction(self):
        return 1.0 / math.factorial(self.d)

    def to_dict(self):
        return {"variant": "weyl_a", "dim": self.d}


@dataclass(frozen=True)
class Polyhedral(ConeSpec):
    """``{x: <n_i, x> > 0 for all i}``; must have nonempty interior."""

    normals_: tuple

    def __post_init__(self):
        rows = [tuple(float(c) for c in _unit(n)) for n in self.normals_]
        if not rows:
            raise ConeError("polyhedral cone needs at least one normal")
        if len({len(r) for r in rows}) != 1:
            raise DimensionMismatch("normals of mixed dimension")
        object.__setattr__(self, "normals_", tuple(rows))
        point, slack = _interior_point(np.array(rows))
        if slack <= 1e-9:
            raise ConeError("normals define a cone with empty interior")
        object.__setattr__(self, "_interior", tuple(point))

    @property
    def dim(self) -> int:
        return len(self.normals_[0])

    def normals(self):
        return np.array(self.normals_)

    def center_direction(self):
        return _unit(self._interior)

    def to_dict(self):
        return {"variant": "polyhedral", "normals": [list(n) for n in self.normals_]}


@dataclass(frozen=True)
class FullSpace(ConeSpec):
    """Whole space: no killing.  Used for unconstrained control runs."""

    d: int

    @property
    def dim(self) -> int:
        return self.d

    def normals(self):
        return np.zeros((0, self.d))

    def margins(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.full((len(pts), 1), np.inf)

    def center_direction(self):
        return _unit(np.ones(self.d))

    def apex_volume_fraction(self):
        return 1.0

    def to_dict(self):
        return {"variant": "full", "dim": self.d}


def _interior_point(normals: np.ndarray) -> tuple[np.ndarray, float]:
    """Maximise the common slack ``s`` with ``<n_i, x> >= s`` in the unit box."""
    from scipy.optimize import linprog

    k, d = normals.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-normals, np.ones((k, 1))])
    bounds = [(-1.0, 1.0)] * d + [(None, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), bounds=bounds, method="highs")
    if not res.success:
        return np.zeros(d), 0.0
    return res.x[:d], float(res.x[-1])


# -- module-level operations -------------------------------------------------

def contains(cone: ConeSpec, point) -> bool:
    return cone.contains(point)


def dist_boundary(cone: ConeSpec, point) -> float:
    return cone.dist_boundary(point)


@dataclass(frozen=True)
class ShrunkenConeQuery:
    """``K_{n,eps}``: points at distance at least ``n ** (1/2 - eps)`` from the boundary."""

    n: int
    epsilon: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")

    @property
    def threshold(self) -> float:
        return self.n ** (0.5 - self.epsilon)


def in_shrunken(cone: ConeSpec, point, q: ShrunkenConeQuery) -> bool:
    if not cone.contains(point):
        return False
    return cone.dist_boundary(point) >= q.threshold


def transform_cone(cone: ConeSpec, t: LinearTransform) -> ConeSpec:
    """Image ``M K`` of the cone under ``x -> M x``.

    Normals map with the inverse transpose.  Positive scalings fix every cone.
    """
    if t.dim != cone.dim:
        raise DimensionMismatch("transform and cone dimensions differ")
    c = t.scalar()
    if c is not None and c > 0:
        return cone
    if isinstance(cone, FullSpace):
        return cone
    new = cone.normals() @ t.inverse  # rows: (M^{-T} n)^T
    new = new / np.linalg.norm(new, axis=1)[:, None]
    if isinstance(cone, HalfSpace):
        return HalfSpace(tuple(new[0]))
    if isinstance(cone, WeylChamberA):
        ref = cone.normals()
        if all(np.any(np.all(np.abs(ref - row) < 1e-12, axis=1)) for row in new):
            return cone
        raise UnsupportedTransform("transform does not preserve the Weyl chamber")
    return Polyhedral(tuple(tuple(r) for r in new))


def cone_from_dict(data: dict) -> ConeSpec:
    try:
        variant = data["variant"].lower()
        if variant == "halfspace":
            return HalfSpace(tuple(data["normal"]))
        if variant == "wedge2d":
            return Wedge2D(float(data["beta"]), float(data.get("base", 0.0)))
        if variant == "orthant":
            return Orthant(int(data["dim"]))
        if variant in ("weyl_a", "weylchambera", "weyl"):
            return WeylChamberA(int(data["dim"]))
        if variant == "polyhedral":
            return Polyhedral(tuple(tuple(n) for n in data["normals"]))
        if variant == "full":
            return FullSpace(int(data["dim"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConeError):
            raise
        raise ConeError(f"malformed cone description: {exc}") from exc
    raise ConeError(f"unknown cone variant {data.get('variant')!r}")


def load_cone(path: str | Path) -> ConeSpec:
    with open(path) as fh:
        return cone_from_dict(json.load(fh))


def push_inside(cone: ConeSpec, x: Sequence[float], t: float, c0: float | None = None) -> np.ndarray:
    """A point ``x_t`` with ``|x_t - x| <= t`` and ``dist(x_t, boundary) >= c0 t``.

    Keeps ``x`` when it is already deep enough, otherwise moves it by ``t``
    along the central ray.  ``c0`` defaults to half the boundary distance of
    the unit central direction.
    """
    w = cone.center_direction()
    if c0 is None:
        c0 = default_c0(cone)
    x = np.asarray(x, dtype=float)
    if cone.contains(x) and cone.dist_boundary(x) >= c0 * t:
        return x
    return x + t * w


def default_c0(cone: ConeSpec) -> float:
    w = cone.center_direction()
    return 0.5 * float(cone.dist_many(w[None, :])[0])
