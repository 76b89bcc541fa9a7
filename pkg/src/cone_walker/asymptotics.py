"""Numerical checks of the critical exponents and local limit shapes.

Everything here consumes data from :mod:`exact_engine` and
:mod:`monte_carlo` and compares it with the predicted power laws and
Gaussian profiles.  Constants (``kappa``, ``chi``) are always estimated, never
assumed; every statement about a constrained local probability is
restricted to the lattice coset the walk can actually reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .cone_geometry import ConeSpec, FullSpace, Polyhedral, transform_cone
from .errors import EmptyGrid, MixedResidueError, NoClosedForm, NonPositiveValue
from .exact_engine import TruncationPolicy, harmonic_V, iterate_layers, local_series, survival
from .monte_carlo import mc_boundary_functional, mc_survival
from .reduite import ReduiteFn, reduite_for
from .walk_model import (
    LinearTransform,
    StepDistribution,
    decorrelate,
    in_step_class,
    reverse,
    validate_model,
)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    residual_max: float
    points: int = 0

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "residual_max": self.residual_max,
            "points": self.points,
        }


def fit_exponent(
    ns: Sequence[int],
    values: Sequence[float],
    window: tuple | None = None,
    period: int = 1,
    residue: int | None = None,
) -> FitResult:
    """Least-squares slope of ``log value`` against ``log n``.

    With ``period > 1`` the points must come from a single residue class:
    pass ``residue`` to select one, otherwise mixed classes raise
    :class:`MixedResidueError`.
    """
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray([float(v) for v in values])
    lo, hi = window if window is not None else (ns.min(), ns.max())
    sel = (ns >= lo) & (ns <= hi)
    if period > 1:
        classes = np.mod(ns.astype(np.int64), period)
        if residue is None:
            if len(set(classes[sel].tolist())) > 1:
                raise MixedResidueError(f"points span several residue classes mod {period}")
        else:
            sel &= classes == residue % period
    ns, vals = ns[sel], vals[sel]
    if len(ns) < 2:
        raise ValueError("need at least two points inside the window")
    if np.any(vals <= 0):
        raise NonPositiveValue("log-log fit needs strictly positive values")
    lx, ly = np.log(ns), np.log(vals)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(
        float(slope), float(intercept), min(1.0, max(0.0, r2)), (float(lo), float(hi)), float(np.abs(resid).max()), len(ns)
    )


def cone_exponent(cone: ConeSpec) -> float:
    """Homogeneity degree ``p`` of the réduite, including planar two-facet polyhedra."""
    if isinstance(cone, FullSpace):
        return 0.0
    if isinstance(cone, Polyhedral) and cone.dim == 2 and len(cone.normals()) == 2:
        n1, n2 = cone.normals()
        opening = math.pi - math.acos(max(-1.0, min(1.0, float(n1 @ n2))))
        return math.pi / opening
    return reduite_for(cone).p


def decorrelated_setup(model: StepDistribution, cone: ConeSpec) -> tuple[LinearTransform, ConeSpec, ReduiteFn | None, float]:
    """Transform, decorrelated cone, its réduite (if catalogued) and exponent."""
    _, m = decorrelate(model)
    dcone = transform_cone(cone, m)
    try:
        u = reduite_for(dcone)
    except NoClosedForm:
        u = None
    return m, dcone, u, cone_exponent(dcone)


@dataclass(frozen=True)
class ExponentCheck:
    fit: FitResult
    expected: float
    tolerance: float
    series: tuple = ()

    @property
    def passed(self) -> bool:
        return abs(self.fit.slope - self.expected) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "expected_slope": self.expected,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _log_points(lo: int, hi: int, count: int, period: int, residue: int) -> list[int]:
    """About ``count`` log-spaced integers in ``[lo, hi]`` of the given class."""
    raw = np.unique(np.round(np.logspace(math.log10(lo), math.log10(hi), count)).astype(int))
    out = []
    for n in raw:
        n = int(n) - ((int(n) - residue) % period)
        if n < lo:
            n += period
        if lo <= n <= hi and n not in out:
            out.append(n)
    return out


def verify_survival_exponent(
    model: StepDistribution,
    cone: ConeSpec,
    x,
    window: tuple,
    tolerance: float = 0.08,
    trunc: TruncationPolicy | None = None,
) -> ExponentCheck:
    """Slope of ``log P(tau_x > n)`` against ``-p/2`` on ``window``.

    Periodic walks are fitted on the class ``n ≡ 0`` (mod period).
    """
    period = validate_model(model).period
    _, _, _, p = decorrelated_setup(model, cone)
    lo, hi = window
    series = survival(model, cone, x, hi, trunc=trunc).values
    ns = _log_points(lo, hi, 60, period, 0)
    fit = fit_exponent(ns, [series[n] for n in ns], window, period, 0)
    return ExponentCheck(fit, -p / 2.0, tolerance, tuple(zip(ns, (float(series[n]) for n in ns))))


def verify_llt_exponent(
    model: StepDistribution,
    cone: ConeSpec,
    x,
    window: tuple,
    tolerance: float = 0.15,
    y=None,
    trunc: TruncationPolicy | None = None,
) -> ExponentCheck:
    """Slope of ``log P(x + S(n) = y, tau_x > n)`` (``y = x`` by default) against ``-(p + d/2)``.

    A :class:`FullSpace` cone gives the unconstrained control with slope ``-d/2``.
    """
    y = tuple(x) if y is None else tuple(y)
    period = validate_model(model).period
    _, _, _, p = decorrelated_setup(model, cone)
    lo, hi = window
    disp = [b - a for a, b in zip(x, y)]
    residue = next(r for r in range(period) if in_step_class(model, disp, hi - ((hi - r) % period)))
    series, _ = local_series(model, cone, x, y, hi, trunc=trunc)
    ns = _log_points(lo, hi, 60, period, residue)
    fit = fit_exponent(ns, [series[n] for n in ns], window, period, residue)
    return ExponentCheck(fit, -(p + model.dim / 2.0), tolerance, tuple(zip(ns, (float(series[n]) for n in ns))))


@dataclass
class RegimeReport:
    """``kappa_estimate`` is the fitted ``kappa V(x)``; ``scale`` the same times ``n^(-p-d/2)``."""

    kappa_estimate: float
    ratio_spread: float
    grid_size: int
    period_class: int
    n: int = 0
    scale: float = 0.0
    ratios: dict = field(default_factory=dict)
    passed: bool | None = None

    def to_dict(self) -> dict:
        return {
            "kappa_estimate": self.kappa_estimate,
            "ratio_spread": self.ratio_spread,
            "grid_size": self.grid_size,
            "period_class": self.period_class,
            "n": self.n,
            "scale": self.scale,
            "ratios": {",".join(map(str, k)) if isinstance(k, tuple) else str(k): v for k, v in self.ratios.items()},
            "passed": self.passed,
        }


def _layer(model, cone, x, n, trunc):
    last = None
    for last in iterate_layers(model, cone, x, n, trunc=trunc):
        pass
    return last


def verify_interior_llt(
    model: StepDistribution,
    cone: ConeSpec,
    x,
    n: int,
    A: float = 2.0,
    epsilon: float = 0.1,
    trim: float = 0.1,
    boundary_control: bool = False,
    max_spread: float = 0.15,
    trunc: TruncationPolicy | None = None,
) -> RegimeReport:
    """Flatness of ``P(x+S(n)=y, tau_x>n) / (u(y) exp(-|y|^2/2n))`` over the deep interior.

    The grid is every lattice ``y`` in the reachable coset with decorrelated
    image inside the shrunken cone and within ``A sqrt n`` of the origin.
    ``boundary_control`` replaces the shrunken cone by ``dist >= 1`` to show
    the boundary correction.
    """
    m, dcone, u, p = decorrelated_setup(model, cone)
    if u is None:
        raise NoClosedForm("interior check needs a closed-form réduite")
    layer = _layer(model, cone, x, n, trunc)
    coords = layer.masses.coordinates().reshape(-1, model.dim)
    mass = layer.masses.array.reshape(-1)
    dec = coords @ np.asarray(m.matrix).T
    thr = 1.0 if boundary_control else n ** (0.5 - epsilon)
    inside = cone.contains_many(coords)
    sel = inside & (dcone.dist_many(dec) >= thr) & (np.linalg.norm(dec, axis=1) <= A * math.sqrt(n))
    x0 = np.asarray(x)
    cls = np.array([sel[i] and in_step_class(model, coords[i] - x0, n) for i in range(len(coords))], dtype=bool)
    if not cls.any():
        raise EmptyGrid(f"no lattice point qualifies at n={n}, A={A}, epsilon={epsilon}")
    r = mass[cls] / (u.values(dec[cls]) * np.exp(-(dec[cls] ** 2).sum(axis=1) / (2.0 * n)))
    scale = float(stats.trim_mean(r, trim))
    spread = float(r.max() / r.min() - 1.0)
    kappa = scale * n ** (p + model.dim / 2.0)
    period = validate_model(model).period
    report = RegimeReport(kappa, spread, int(cls.sum()), n % period, n, scale)
    report.passed = spread <= max_spread
    return report


def quadrant_boundary_point(model: StepDistribution, x, n: int) -> tuple:
    """``(1, m)`` with ``m`` the nearest integer to ``sqrt n`` in the reachable coset."""
    base = round(math.sqrt(n))
    for k in range(0, 4 * max(1, validate_model(model).period)):
        for m_ in (base + k, base - k):
            if m_ >= 1 and in_step_class(model, (1 - x[0], m_ - x[1]), n):
                return (1, m_)
    raise EmptyGrid("no reachable boundary point near (1, sqrt n)")


def verify_boundary_llt(
    model: StepDistribution,
    cone: ConeSpec,
    x,
    n_list: Sequence[int],
    calibration: RegimeReport,
    epsilon: float = 0.1,
    mc_samples: int = 100_000,
    seed: int = 0,
    ys: dict | None = None,
    bounds: tuple = (0.8, 1.25),
    threads: int | None = None,
    trunc: TruncationPolicy | None = None,
) -> RegimeReport:
    """Exact local probabilities near the boundary against the boundary-functional prediction.

    The prediction is ``kappa V(x) n^(-p/2-d/2) F(y, n) exp(-|y|^2/2n)`` where
    ``F`` is the entrance functional of the reversed walk (Monte Carlo) and
    ``kappa V(x)`` comes from ``calibration``.  ``ys`` maps ``n`` to the end
    point; by default ``(1, ~sqrt n)`` in the quadrant.
    """
    m, dcone, u, p = decorrelated_setup(model, cone)
    d = model.dim
    n_list = sorted(n_list)
    ys = dict(ys or {n: quadrant_boundary_point(model, x, n) for n in n_list})
    exact = {}
    want = set(n_list)
    for layer in iterate_layers(model, cone, x, n_list[-1], trunc=trunc):
        if layer.n in want:
            exact[layer.n] = float(layer.mass_at(ys[layer.n]))
    rev = reverse(model)
    ratios = {}
    for n in n_list:
        y = ys[n]
        f = mc_boundary_functional(rev, cone, u, y, n, epsilon, mc_samples, seed + n, transform=m, threads=threads)
        yd = np.asarray(m.matrix) @ np.asarray(y, dtype=float)
        pred = calibration.kappa_estimate * n ** (-p / 2 - d / 2) * f.mean * math.exp(-(yd @ yd) / (2.0 * n))
        ratios[n] = exact[n] / pred if pred > 0 else math.inf
    vals = np.array(list(ratios.values()))
    report = RegimeReport(
        calibration.kappa_estimate,
        float(vals.max() / vals.min() - 1.0),
        len(n_list),
        calibration.period_class,
        n_list[-1],
        calibration.scale,
        ratios,
    )
    report.passed = bool(np.all((vals >= bounds[0]) & (vals <= bounds[1])))
    return report


@dataclass(frozen=True)
class HarmonicityReport:
    max_defect: float
    values: dict

    def to_dict(self) -> dict:
        return {
            "max_defect": self.max_defect,
            "values": {",".join(map(str, k)): v for k, v in self.values.items()},
        }


def verify_harmonicity_V(
    model: StepDistribution,
    cone: ConeSpec,
    points: Sequence[Sequence[int]],
    N: int,
    u: ReduiteFn | None = None,
    trunc: TruncationPolicy | None = None,
) -> HarmonicityReport:
    """One-step harmonic defect of ``V ≈ E[u(x + S(N)); tau_x > N]``.

    ``u`` acts on decorrelated coordinates and defaults to the catalog
    réduite of the decorrelated cone.
    """
    m, _, u0, _ = decorrelated_setup(model, cone)
    u = u or u0
    if u is None:
        raise NoClosedForm("harmonicity check needs a réduite")
    cache: dict[tuple, float] = {}

    def V(z):
        z = tuple(int(c) for c in z)
        if z not in cache:
            cache[z] = harmonic_V(model, cone, u, z, N, transform=m, trunc=trunc).values[-1]
        return cache[z]

    worst = 0.0
    for z in points:
        z = tuple(int(c) for c in z)
        rhs = 0.0
        for s, prob in model.steps:
            t = tuple(a + b for a, b in zip(z, s))
            if cone.contains(t):
                rhs += float(prob) * V(t)
        worst = max(worst, abs(V(z) - rhs) / abs(V(z)))
    return HarmonicityReport(worst, dict(cache))


@dataclass(frozen=True)
class LowerBoundReport:
    minimum: float
    table: dict
    consecutive_ratios: tuple

    def to_dict(self) -> dict:
        return {
            "minimum": self.minimum,
            "table": {f"{','.join(map(str, z))}@{n}": v for (z, n), v in self.table.items()},
            "consecutive_ratios": list(self.consecutive_ratios),
        }


def verify_uniform_lower_bound(
    model: StepDistribution,
    cone: ConeSpec,
    points: Sequence[Sequence[int]],
    n_list: Sequence[int],
    samples: int,
    seed: int,
    threads: int | None = None,
) -> LowerBoundReport:
    """``n^(p/2) P̂(tau_z > n)`` over boundary-adjacent ``z`` and several ``n``."""
    *_, p = decorrelated_setup(model, cone)
    table = {}
    ratios = []
    for z in points:
        z = tuple(int(c) for c in z)
        prev = None
        for n in sorted(n_list):
            est = mc_survival(model, cone, z, n, samples, seed, threads)
            val = n ** (p / 2) * est.mean
            table[(z, n)] = val
            if prev:
                ratios.append(val / prev)
            prev = val
    return LowerBoundReport(min(table.values()), table, tuple(ratios))


@dataclass(frozen=True)
class BaselineCheck:
    exact: float
    predicted: float

    @property
    def relative_error(self) -> float:
        return abs(self.exact / self.predicted - 1.0)


def unconstrained_baseline(model: StepDistribution, n: int, trunc: TruncationPolicy | None = None) -> BaselineCheck:
    """Exact ``P(S(n) = 0)`` against ``index (2 pi n)^(-d/2) det(Q)^(-1/2)``.

    ``index`` is the index of the step-difference lattice, the density of
    the coset the walk occupies at time ``n``.
    """
    d = model.dim
    rep = validate_model(model)
    if not in_step_class(model, (0,) * d, n):
        return BaselineCheck(0.0, 0.0)
    layer = _layer(model, FullSpace(d), (0,) * d, n, trunc)
    det = float(np.linalg.det(model.covariance()))
    pred = rep.difference_index * (2.0 * math.pi * n) ** (-d / 2.0) / math.sqrt(det)
    return BaselineCheck(float(layer.mass_at((0,) * d)), pred)
