"""Closed-form réduite (positive harmonic function vanishing on the boundary).

Catalog:

=============  ===================================  ==============
cone           u(x)                                 exponent p
=============  ===================================  ==============
HalfSpace      <x, n>                               1
Wedge2D(beta)  r^(pi/beta) sin(pi (theta-base)/beta)  pi/beta
Orthant(d)     x_1 x_2 ... x_d                      d
WeylChamberA   prod_{i<j} (x_j - x_i)               d(d-1)/2
=============  ===================================  ==============

All closed forms carry normalisation 1; ``u`` is only defined up to a
positive multiple, so downstream code never depends on the scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .cone_geometry import ConeSpec, HalfSpace, Orthant, WeylChamberA, Wedge2D
from .errors import NoClosedForm, PointOutsideCone


@dataclass(frozen=True)
class ReduiteFn:
    cone: ConeSpec
    p: float
    normalization: float = 1.0

    def __call__(self, x) -> float:
        return float(self.values(np.asarray(x, dtype=float)[None, :])[0])

    def values(self, points) -> np.ndarray:
        """Vectorised evaluation on an ``(N, d)`` array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cone = self.cone
        if isinstance(cone, HalfSpace):
            v = pts @ np.array(cone.normal)
        elif isinstance(cone, Orthant):
            v = np.prod(pts, axis=1)
        elif isinstance(cone, WeylChamberA):
            v = np.ones(len(pts))
            for i in range(cone.d):
                for j in range(i + 1, cone.d):
                    v = v * (pts[:, j] - pts[:, i])
        elif isinstance(cone, Wedge2D):
            r, theta = cone.polar_many(pts)
            v = r**self.p * np.sin(self.p * theta)
        else:  # pragma: no cover - guarded by reduite_for
            raise NoClosedForm(type(cone).__name__)
        return self.normalization * v

    def value_mp(self, x, dps: int = 40):
        """High-precision value (``mpmath.mpf``); used by finite-difference checks."""
        with mpmath.workdps(dps):
            xs = [mpmath.mpf(c) if not isinstance(c, mpmath.mpf) else c for c in x]
            cone = self.cone
            if isinstance(cone, HalfSpace):
                v = mpmath.fsum(a * mpmath.mpf(b) for a, b in zip(xs, cone.normal))
            elif isinstance(cone, Orthant):
                v = mpmath.fprod(xs)
            elif isinstance(cone, WeylChamberA):
                v = mpmath.fprod(xs[j] - xs[i] for i in range(cone.d) for j in range(i + 1, cone.d))
            elif isinstance(cone, Wedge2D):
                c, s = mpmath.cos(cone.base), mpmath.sin(cone.base)
                a = c * xs[0] + s * xs[1]
                b = -s * xs[0] + c * xs[1]
                r = mpmath.hypot(a, b)
                th = mpmath.atan2(b, a)
                p = mpmath.pi / mpmath.mpf(cone.beta)
                v = r**p * mpmath.sin(p * th)
            else:  # pragma: no cover
                raise NoClosedForm(type(cone).__name__)
            return mpmath.mpf(self.normalization) * v

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cone = self.cone
        if isinstance(cone, HalfSpace):
            g = np.array(cone.normal)
        elif isinstance(cone, Orthant):
            g = np.array([np.prod(np.delete(x, k)) for k in range(cone.d)])
        elif isinstance(cone, WeylChamberA):
            u = self(x) / self.normalization
            g = np.array([u * sum(1.0 / (x[k] - x[j]) for j in range(cone.d) if j != k) for k in range(cone.d)])
        elif isinstance(cone, Wedge2D):
            r, th = cone.polar(x)
            p = self.p
            a = th + cone.base
            e_r = np.array([math.cos(a), math.sin(a)])
            e_t = np.array([-math.sin(a), math.cos(a)])
            g = p * r ** (p - 1) * (math.sin(p * th) * e_r + math.cos(p * th) * e_t)
        else:  # pragma: no cover
            raise NoClosedForm(type(cone).__name__)
        return self.normalization * g


def reduite_for(cone: ConeSpec) -> ReduiteFn:
    if isinstance(cone, HalfSpace):
        return ReduiteFn(cone, 1.0)
    if isinstance(cone, Wedge2D):
        return ReduiteFn(cone, math.pi / cone.beta)
    if isinstance(cone, Orthant):
        return ReduiteFn(cone, float(cone.d))
    if isinstance(cone, WeylChamberA):
        return ReduiteFn(cone, cone.d * (cone.d - 1) / 2.0)
    raise NoClosedForm(f"no closed-form réduite for {type(cone).__name__} cones")


def evaluate(u: ReduiteFn, x) -> float:
    return u(x)


def grad(u: ReduiteFn, x) -> np.ndarray:
    if not u.cone.contains(x):
        raise PointOutsideCone(f"{tuple(x)} is not in the open cone")
    return u.gradient(x)


def check_harmonic(
    u: ReduiteFn,
    samples: int = 100,
    h: float = 1e-3,
    seed: int = 0,
    radius: tuple[float, float] = (0.5, 2.0),
) -> float:
    """Max of ``|Delta_h u| / (1 + |u|)`` over random interior points.

    ``Delta_h`` is the ``2d``-point finite-difference Laplacian.  Stencil
    values are taken in 40-digit arithmetic so the residual measures the
    O(h^2) truncation error rather than cancellation.  Points closer than
    ``10 h`` to the boundary are skipped.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    rng = np.random.default_rng(seed)
    cone = u.cone
    d = cone.dim
    pts = []
    while len(pts) < samples:
        cand = cone.sample(rng, samples, radius=radius[1], min_dist=10 * h)
        norms = np.linalg.norm(cand, axis=1)
        pts.extend(cand[norms >= radius[0]])
    worst = 0.0
    with mpmath.workdps(40):
        hh = mpmath.mpf(h)
        for x in pts[:samples]:
            xs = [mpmath.mpf(float(c)) for c in x]
            centre = u.value_mp(xs)
            lap = -2 * d * centre
            for k in range(d):
                for sgn in (1, -1):
                    y = list(xs)
                    y[k] += sgn * hh
                    lap += u.value_mp(y)
            res = abs(lap / hh**2) / (1 + abs(centre))
            worst = max(worst, float(res))
    return worst
