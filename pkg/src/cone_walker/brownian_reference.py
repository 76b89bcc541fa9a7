"""Dirichlet heat kernels and survival probabilities of Brownian motion in cones.

Closed forms: method of images for half-spaces, products for orthants,
Karlin-McGregor determinants for Weyl chambers, and the Bessel eigenfunction
series for planar wedges.  Also hosts the fitted small-``x`` constants and the
numerical Gaussian-bound suite.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .cone_geometry import (
    ConeSpec,
    HalfSpace,
    Orthant,
    WeylChamberA,
    Wedge2D,
    push_inside,
)
from .errors import FitDiverged, NoClosedForm, PointOutsideCone, SeriesNotConverged
from .monte_carlo import MCEstimate, run_blocks
from .reduite import ReduiteFn, reduite_for

_SQRT2PI = math.sqrt(2.0 * math.pi)


# -- one-dimensional building blocks ----------------------------------------

def _gauss(diff2, t, d):
    return np.exp(-diff2 / (2.0 * t)) / (2.0 * math.pi * t) ** (d / 2.0)


def halfline_kernel(x, y, t):
    """``g_t(y - x) - g_t(y + x)`` on ``(0, inf)``, written to avoid cancellation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - x) ** 2) / (2.0 * t)) / (_SQRT2PI * math.sqrt(t)) * -np.expm1(-2.0 * x * y / t)


def halfline_survival(x, t):
    return special.erf(np.asarray(x, dtype=float) / math.sqrt(2.0 * t))


def halfspace_kernel(x, y, t, normal=None):
    """Image formula in ``d`` dimensions; ``normal`` defaults to ``e_d``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = np.zeros(x.shape[-1]) if normal is None else np.asarray(normal, dtype=float)
    if normal is None:
        n[-1] = 1.0
    a = x @ n
    b = y @ n
    if np.any(a <= 0):
        raise PointOutsideCone("x must lie in the open half-space")
    diff2 = ((y - x) ** 2).sum(axis=-1)
    return _gauss(diff2, t, x.shape[-1]) * np.where(b > 0, -np.expm1(-2.0 * a * b / t), 0.0)


def orthant_kernel(x, y, t):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0):
        raise PointOutsideCone("x must lie in the open orthant")
    k = halfline_kernel(x, np.maximum(y, 0.0), t)
    return np.prod(k, axis=-1)


def orthant_survival(x, t):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise PointOutsideCone("x must lie in the open orthant")
    return np.prod(halfline_survival(x, t), axis=-1)


# -- wedge series ------------------------------------------------------------

def _series_sum(terms: np.ndarray, scale: np.ndarray, tol: float, what: str) -> tuple[np.ndarray, float]:
    """Sum a ``(N, J)`` array of terms; ``scale`` bounds the size of term ``j``."""
    ratio = float(np.max(scale[..., -1] / np.maximum(scale[..., 0], 1e-300)))
    if ratio > tol:
        raise SeriesNotConverged(f"{what}: last retained term ratio {ratio:.3e} exceeds {tol:.1e}")
    return terms.sum(axis=-1), ratio


def _raw_wedge_kernel(beta, r, th, rho, phi, t, terms, tol):
    """Unnormalised wedge series ``(1/t) exp(...) sum_j I_nu(r rho/t) sin sin``."""
    r, th, rho, phi = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (r, th, rho, phi))
    nu = np.arange(1, terms + 1) * (math.pi / beta)
    z = (r * rho / t)[:, None]
    bess = special.ive(nu[None, :], z)  # I_nu(z) e^{-z}
    body = bess * np.sin(nu * th[:, None]) * np.sin(nu * phi[:, None])
    s, ratio = _series_sum(body, bess, tol, "wedge kernel")
    return (2.0 / (beta * t)) * np.exp(-((r - rho) ** 2) / (2.0 * t)) * s, ratio


@functools.lru_cache(maxsize=None)
def wedge_normalization() -> float:
    """Scalar matching the wedge series at opening ``pi`` to the half-plane images.

    Computed, not assumed: the median ratio over a fixed set of reference
    points.  Evaluates to 1 up to rounding.
    """
    rng = np.random.default_rng(12345)
    r = rng.uniform(0.2, 3.0, 16)
    rho = rng.uniform(0.2, 3.0, 16)
    th = rng.uniform(0.1, math.pi - 0.1, 16)
    ph = rng.uniform(0.1, math.pi - 0.1, 16)
    raw, _ = _raw_wedge_kernel(math.pi, r, th, rho, ph, 1.0, 200, 1e-12)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    y = np.column_stack([rho * np.cos(ph), rho * np.sin(ph)])
    img = halfspace_kernel(x, y, 1.0, normal=(0.0, 1.0))
    return float(np.median(img / raw))


def wedge_kernel(beta, x_polar, y_polar, t, terms=200, tol=1e-12):
    """Dirichlet heat kernel of the wedge ``{0 < theta < beta}`` in polar input.

    ``x_polar`` and ``y_polar`` are ``(r, theta)`` pairs or ``(N, 2)`` arrays.
    Returns ``(value, last_term_ratio)``.
    """
    xp = np.atleast_2d(np.asarray(x_polar, dtype=float))
    yp = np.atleast_2d(np.asarray(y_polar, dtype=float))
    raw, ratio = _raw_wedge_kernel(beta, xp[:, 0], xp[:, 1], yp[:, 0], yp[:, 1], t, terms, tol)
    return wedge_normalization() * raw, ratio


def wedge_survival(beta, x_polar, t, terms=200, tol=1e-12):
    """``P(tau > t)`` from the wedge; series over odd ``j`` of half-order Bessel pairs.

    Returns ``(value, last_term_ratio)``.
    """
    xp = np.atleast_2d(np.asarray(x_polar, dtype=float))
    r, th = xp[:, 0], xp[:, 1]
    j = np.arange(1, 2 * terms, 2)
    nu = j * (math.pi / beta)
    z = (r**2 / (4.0 * t))[:, None]
    pair = special.ive((nu - 1) / 2, z) + special.ive((nu + 1) / 2, z)
    body = (4.0 / (j * math.pi)) * np.sin(nu * th[:, None]) * np.sqrt(math.pi * z / 2.0) * pair
    scale = (4.0 / (j * math.pi)) * pair
    s, ratio = _series_sum(body, scale, tol, "wedge survival")
    return wedge_normalization() * s, ratio


# -- Weyl chamber -------------------------------------------------------------

def weyl_kernel(x, y, t):
    """Karlin-McGregor determinant ``det[g_t(y_j - x_i)]`` for ``x_1 < ... < x_d``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y[..., None, :] - x[..., :, None]
    mats = np.exp(-(diff**2) / (2.0 * t)) / (_SQRT2PI * math.sqrt(t))
    return np.linalg.det(mats)


def weyl_survival(x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 2:
        raise NoClosedForm("Weyl chamber survival is closed-form only for d = 2")
    return special.erf((x[:, 1] - x[:, 0]) / (2.0 * math.sqrt(t)))


# -- unified evaluator ------------------------------------------------------

@dataclass(frozen=True)
class KernelEvaluator:
    """``K_t`` and ``k_t`` for a catalog cone in Cartesian coordinates."""

    cone: ConeSpec
    series_terms: int = 200
    tolerance: float = 1e-12

    def kernel_many(self, x, ys, t) -> np.ndarray:
        """``K_t(x, y)`` for one ``x`` and an ``(N, d)`` array of ``y``."""
        x = np.asarray(x, dtype=float)
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if not self.cone.contains(x):
            raise PointOutsideCone(f"{tuple(x)} is not in the open cone")
        inside = self.cone.contains_closed_many(ys)
        c = self.cone
        if isinstance(c, HalfSpace):
            val = halfspace_kernel(np.broadcast_to(x, ys.shape), ys, t, c.normal)
        elif isinstance(c, Orthant):
            val = orthant_kernel(np.broadcast_to(x, ys.shape), ys, t)
        elif isinstance(c, WeylChamberA):
            val = weyl_kernel(np.broadcast_to(x, ys.shape), ys, t)
        elif isinstance(c, Wedge2D):
            r, th = c.polar_many(x[None, :])
            rho, ph = c.polar_many(ys)
            val, _ = wedge_kernel(
                c.beta,
                np.column_stack([np.full_like(rho, r[0]), np.full_like(rho, th[0])]),
                np.column_stack([rho, ph]),
                t,
                self.series_terms,
                self.tolerance,
            )
        else:
            raise NoClosedForm(f"no heat kernel for {type(c).__name__} cones")
        return np.where(inside, np.maximum(val, 0.0), 0.0)

    def kernel(self, x, y, t) -> float:
        return float(self.kernel_many(x, np.asarray(y, dtype=float)[None, :], t)[0])

    def survival_many(self, xs, t) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if not self.cone.contains_many(xs).all():
            raise PointOutsideCone("all points must lie in the open cone")
        c = self.cone
        if isinstance(c, HalfSpace):
            return halfline_survival(xs @ np.asarray(c.normal), t)
        if isinstance(c, Orthant):
            return orthant_survival(xs, t)
        if isinstance(c, WeylChamberA):
            return weyl_survival(xs, t)
        if isinstance(c, Wedge2D):
            r, th = c.polar_many(xs)
            return wedge_survival(c.beta, np.column_stack([r, th]), t, self.series_terms, self.tolerance)[0]
        raise NoClosedForm(f"no survival formula for {type(c).__name__} cones")

    def survival(self, x, t) -> float:
        return float(self.survival_many(np.asarray(x, dtype=float)[None, :], t)[0])


# -- quadrature ---------------------------------------------------------------

def _gl(a, b, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def integrate_kernel(ev: KernelEvaluator, x, t, order: int = 96) -> float:
    """``int_K K_t(x, y) dy`` by Gauss-Legendre on a box of half-width ``8 sqrt t``."""
    x = np.asarray(x, dtype=float)
    c = ev.cone
    w8 = 8.0 * math.sqrt(t)
    if isinstance(c, HalfSpace):
        # tangential directions integrate to one; only the normal coordinate remains
        a = float(x @ np.asarray(c.normal))
        s, w = _gl(0.0, a + w8, order)
        return float(w @ halfline_kernel(a, s, t))
    if isinstance(c, Orthant):
        total = 1.0
        for xi in x:
            s, w = _gl(0.0, xi + w8, order)
            total *= float(w @ halfline_kernel(xi, s, t))
        return total
    if isinstance(c, Wedge2D):
        r0, _ = c.polar(x)
        rs, wr = _gl(0.0, r0 + w8, order)
        ps, wp = _gl(0.0, c.beta, order)
        rr, pp = np.meshgrid(rs, ps, indexing="ij")
        a = pp + c.base
        ys = np.column_stack([(rr * np.cos(a)).ravel(), (rr * np.sin(a)).ravel()])
        vals = ev.kernel_many(x, ys, t).reshape(rr.shape) * rr
        return float(wr @ vals @ wp)
    raise NoClosedForm(f"no quadrature rule for {type(c).__name__} cones")


def chapman_kolmogorov_defect(x: float, y: float, s: float, t: float, order: int = 400) -> float:
    """``|int K_s(x,z) K_t(z,y) dz - K_{s+t}(x,y)|`` on the half-line."""
    z, w = _gl(0.0, max(x, y) + 8.0 * math.sqrt(max(s, t)), order)
    lhs = float(w @ (halfline_kernel(x, z, s) * halfline_kernel(z, y, t)))
    return abs(lhs - float(halfline_kernel(x, y, s + t)))


# -- Monte Carlo references -------------------------------------------------

def _crossing_weight(cone: ConeSpec, a_pts: np.ndarray, b_pts: np.ndarray, dt: float) -> np.ndarray:
    """Probability that a Brownian bridge between grid points stays off every facet plane.

    Exact for half-spaces and orthants (independent facets); a product
    approximation for other polyhedral cones.
    """
    ma = cone.margins(a_pts)
    mb = cone.margins(b_pts)
    ok = (ma > 0).all(axis=1) & (mb > 0).all(axis=1)
    w = np.prod(-np.expm1(-2.0 * np.clip(ma, 0, None) * np.clip(mb, 0, None) / dt), axis=1)
    return np.where(ok, w, 0.0)


def mc_brownian_survival(cone, x, t, samples, seed, steps: int = 16, threads=None) -> MCEstimate:
    """``P(tau_bm > t)`` by grid simulation with a bridge-crossing correction per interval."""
    x = np.asarray(x, dtype=float)
    dt = t / steps

    def kernel(rng, count):
        pos = np.tile(x, (count, 1))
        weight = np.ones(count)
        for _ in range(steps):
            nxt = pos + math.sqrt(dt) * rng.standard_normal((count, cone.dim))
            weight *= _crossing_weight(cone, pos, nxt, dt)
            pos = nxt
        return weight[:, None]

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return MCEstimate(float(mean[0]), float(se[0]), samples, seed, blocks)


def mc_bridge_survival(cone, x, y, t, samples, seed, steps: int = 8, threads=None) -> MCEstimate:
    """Probability that the Brownian bridge ``x -> y`` on ``[0, t]`` stays in the cone.

    ``K_t(x, y) = g_t(y - x)`` times this probability.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = np.linspace(0.0, t, steps + 1)
    dt = t / steps

    def kernel(rng, count):
        inc = math.sqrt(dt) * rng.standard_normal((count, steps, cone.dim))
        w = np.concatenate([np.zeros((count, 1, cone.dim)), np.cumsum(inc, axis=1)], axis=1)
        frac = (grid / t)[None, :, None]
        path = x + w - frac * w[:, -1:, :] + frac * (y - x)
        weight = np.ones(count)
        for k in range(steps):
            weight *= _crossing_weight(cone, path[:, k], path[:, k + 1], dt)
        return weight[:, None]

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return MCEstimate(float(mean[0]), float(se[0]), samples, seed, blocks)


# -- ball volumes -------------------------------------------------------------

def ball_cone_volume(cone: ConeSpec, z, r: float) -> float:
    """Volume ``V(z, r)`` of ``B(z, r) ∩ K`` (half-spaces in any ``d``, other cones in ``d <= 2``)."""
    z = np.asarray(z, dtype=float)
    d = cone.dim
    if isinstance(cone, HalfSpace):
        a = float(z @ np.asarray(cone.normal))
        full = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d
        if a >= r:
            return full
        if a <= -r:
            return 0.0
        cap = 0.5 * special.betainc((d + 1) / 2, 0.5, 1.0 - (a / r) ** 2)
        return full * (1.0 - cap) if a >= 0 else full * cap
    if d == 1:
        n = float(cone.normals()[0, 0])
        lo, hi = z[0] - r, z[0] + r
        return max(0.0, hi - max(lo, 0.0)) if n > 0 else max(0.0, min(hi, 0.0) - lo)
    if d != 2:
        raise NoClosedForm("ball volumes are implemented for d <= 2 and half-spaces")
    normals = cone.normals()

    def chord(x1):
        h2 = r * r - (x1 - z[0]) ** 2
        if h2 <= 0:
            return 0.0
        h = math.sqrt(h2)
        lo, hi = z[1] - h, z[1] + h
        for n1, n2 in normals:
            if abs(n2) < 1e-15:
                if n1 * x1 <= 0:
                    return 0.0
            elif n2 > 0:
                lo = max(lo, -n1 * x1 / n2)
            else:
                hi = min(hi, -n1 * x1 / n2)
        return max(0.0, hi - lo)

    # the chord length has kinks where a facet line crosses the circle
    breaks = {0.0}
    for n1, n2 in normals:
        dvec = np.array([n2, -n1])
        b = dvec @ z
        disc = b * b - (z @ z - r * r)
        if disc > 0:
            breaks.update(float((b + sg * math.sqrt(disc)) * dvec[0]) for sg in (-1, 1))
    pts = sorted(b for b in breaks if z[0] - r < b < z[0] + r)
    val, _ = integrate.quad(chord, z[0] - r, z[0] + r, points=pts or None, limit=200, epsabs=1e-12, epsrel=1e-10)
    return val


def apex_ball_volume(cone: ConeSpec, r: float = 1.0) -> float:
    """``V(0, r)`` from the cone's solid-angle fraction."""
    frac = cone.apex_volume_fraction()
    if frac is None:
        raise NoClosedForm("solid-angle fraction unknown for this cone")
    d = cone.dim
    return frac * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


# -- asymptotic constants ---------------------------------------------------

@dataclass(frozen=True)
class AsymptoticConstants:
    chi: float
    chi0: float
    fit_window: tuple
    fit_residual: float

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "chi0": self.chi0,
            "fit_window": list(self.fit_window),
            "fit_residual": self.fit_residual,
        }


def _limit_fit(ts: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    """Fit ``g(t) = a + b/t`` on the upper half of the grid; return ``a`` and max relative deviation."""
    half = len(ts) // 2
    tt, gg = ts[half:], g[half:]
    design = np.column_stack([np.ones_like(tt), 1.0 / tt])
    (a, _), *_ = np.linalg.lstsq(design, gg, rcond=None)
    return float(a), float(np.max(np.abs(gg / a - 1.0)))


def fit_asymptotic_constants(
    cone: ConeSpec,
    u: ReduiteFn | None = None,
    x=None,
    y=None,
    t_grid=None,
    evaluator: KernelEvaluator | None = None,
    max_residual: float = 0.05,
) -> AsymptoticConstants:
    """Estimate ``chi`` and ``chi0`` from ``k_t t^(p/2) / u(x)`` and the kernel analogue.

    ``x`` and ``y`` default to the unit central direction; the grid defaults
    to 26 log-spaced times in ``[10, 10^6]``.
    """
    u = u or reduite_for(cone)
    ev = evaluator or KernelEvaluator(cone)
    w = cone.center_direction()
    x = np.asarray(w if x is None else x, dtype=float)
    y = np.asarray(w if y is None else y, dtype=float)
    ts = np.logspace(1, 6, 26) if t_grid is None else np.asarray(t_grid, dtype=float)
    d, p = cone.dim, u.p
    gk = np.array([ev.survival(x, t) * t ** (p / 2) / u(x) for t in ts])
    gK = np.array(
        [ev.kernel(x, y, t) * t ** (d / 2 + p) / (u(x) * u(y) * math.exp(-(y @ y) / (2 * t))) for t in ts]
    )
    chi, res1 = _limit_fit(ts, gk)
    chi0, res2 = _limit_fit(ts, gK)
    residual = max(res1, res2)
    if not (chi > 0 and chi0 > 0) or residual > max_residual:
        raise FitDiverged(f"asymptotic fit residual {residual:.3g} exceeds {max_residual}")
    return AsymptoticConstants(chi, chi0, (float(ts[len(ts) // 2]), float(ts[-1])), residual)


# -- Gaussian bound suite -----------------------------------------------------

@dataclass
class BoundCheckReport:
    """Ratio statistics per time ``t``; every entry is ``(min, max)`` over the sample."""

    times: list
    survival_ratio: dict = field(default_factory=dict)
    kernel_lower: dict = field(default_factory=dict)
    kernel_upper: dict = field(default_factory=dict)
    c3: float = 0.0
    C3: float = 0.0
    ball_constant: float = 0.0
    ball_reference: float = 0.0
    scaling_ratio_range: tuple = (0.0, 0.0)
    holder_alpha: float = 0.0
    holder_quotient_max: float = 0.0
    time_derivative_max: float = 0.0

    @staticmethod
    def _stability(stats: dict, idx: int) -> float:
        vals = [v[idx] for v in stats.values()]
        return max(vals) / min(vals)

    def stability(self) -> dict:
        """Across-``t`` ratio max/min of the bounding statistic of each family."""
        return {
            "survival_lower": self._stability(self.survival_ratio, 0),
            "survival_upper": self._stability(self.survival_ratio, 1),
            "kernel_lower": self._stability(self.kernel_lower, 0),
            "kernel_upper": self._stability(self.kernel_upper, 1),
        }

    def passed(self, spread: float = 10.0) -> bool:
        stats = [v for fam in (self.survival_ratio, self.kernel_lower, self.kernel_upper) for v in fam.values()]
        finite = all(0 < a <= b < math.inf for a, b in stats)
        stable = all(s < spread for s in self.stability().values())
        lo, hi = self.scaling_ratio_range
        return (
            finite
            and stable
            and self.ball_constant >= self.ball_reference * (1 - 1e-9)
            and 0 < lo <= hi <= 1.0 + 1e-12
            and math.isfinite(self.holder_quotient_max)
            and math.isfinite(self.time_derivative_max)
        )

    def to_dict(self) -> dict:
        key = lambda m: {str(t): list(v) for t, v in m.items()}  # noqa: E731
        return {
            "times": list(self.times),
            "survival_ratio": key(self.survival_ratio),
            "kernel_lower": key(self.kernel_lower),
            "kernel_upper": key(self.kernel_upper),
            "c3": self.c3,
            "C3": self.C3,
            "ball_constant": self.ball_constant,
            "ball_reference": self.ball_reference,
            "scaling_ratio_range": list(self.scaling_ratio_range),
            "holder_alpha": self.holder_alpha,
            "holder_quotient_max": self.holder_quotient_max,
            "time_derivative_max": self.time_derivative_max,
            "stability": self.stability(),
            "passed": self.passed(),
        }


def _log_spread(v: np.ndarray) -> float:
    return float(np.log(v.max() / v.min()))


def check_gaussian_bounds(
    cone: ConeSpec,
    samples: int = 200,
    seed: int = 0,
    times=(1.0, 10.0, 100.0),
    evaluator: KernelEvaluator | None = None,
) -> BoundCheckReport:
    """Evaluate the two-sided Gaussian bound ratios on random points and times.

    For each ``t``, points are drawn uniformly from ``K ∩ B(0, 3 sqrt t)``.
    The exponential rates of the kernel sandwich are fitted by a grid search
    that minimises the spread of each side's ratio.
    """
    ev = evaluator or KernelEvaluator(cone)
    u = reduite_for(cone)
    rng = np.random.default_rng(seed)
    report = BoundCheckReport(list(times))
    pairs = {}
    for t in times:
        s = math.sqrt(t)
        xs = cone.sample(rng, samples, radius=3 * s)
        ys = cone.sample(rng, samples, radius=3 * s)
        kx = ev.survival_many(xs, t)
        ky = ev.survival_many(ys, t)
        ux = u.values(xs)
        uxt = u.values(np.array([push_inside(cone, x, s) for x in xs]))
        r = kx * uxt / ux
        report.survival_ratio[t] = (float(r.min()), float(r.max()))
        vx = np.array([ball_cone_volume(cone, x, s) for x in xs])
        vy = np.array([ball_cone_volume(cone, y, s) for y in ys])
        kern = np.array([ev.kernel(x, y, t) for x, y in zip(xs, ys)])
        base = kx * ky / np.sqrt(vx * vy)
        d2 = ((xs - ys) ** 2).sum(axis=1) / t
        keep = kern > 0
        pairs[t] = (kern[keep], base[keep], d2[keep])
    grid = np.linspace(0.5, 8.0, 151)

    def spread(c):
        return max(_log_spread(k / (b * np.exp(-d / c))) for k, b, d in pairs.values())

    report.C3 = float(min(grid[grid <= 2.0], key=spread))
    report.c3 = float(min(grid[grid >= 2.0], key=spread))
    for t, (k, b, d) in pairs.items():
        lo = k / (b * np.exp(-d / report.C3))
        hi = k / (b * np.exp(-d / report.c3))
        report.kernel_lower[t] = (float(lo.min()), float(lo.max()))
        report.kernel_upper[t] = (float(hi.min()), float(hi.max()))

    # inf_z V(z, sqrt t) / t^(d/2) against V(0, 1)
    if cone.dim <= 2 or isinstance(cone, HalfSpace):
        vals = []
        for t in times:
            zs = cone.sample(rng, 50, radius=5 * math.sqrt(t))
            vals.extend(ball_cone_volume(cone, z, math.sqrt(t)) / t ** (cone.dim / 2) for z in zs)
        report.ball_constant = float(min(vals))
        report.ball_reference = apex_ball_volume(cone)

    # k_bar(s x) / k_bar(x) for s in [t0, 1], k_bar = k_1
    pts = cone.sample(rng, 1000, radius=4.0)
    sc = rng.uniform(0.1, 1.0, len(pts))
    ratio = ev.survival_many(pts * sc[:, None], 1.0) / ev.survival_many(pts, 1.0)
    report.scaling_ratio_range = (float(ratio.min()), float(ratio.max()))

    # Hoelder quotient of k_bar with an exponent fitted on random close pairs
    a = cone.sample(rng, 400, radius=4.0, min_dist=0.05)
    step = rng.normal(size=a.shape)
    step /= np.linalg.norm(step, axis=1)[:, None]
    h = 10.0 ** rng.uniform(-4, 0, len(a))
    b = a + step * h[:, None]
    ok = cone.contains_many(b)
    a, b, h = a[ok], b[ok], h[ok]
    dk = np.abs(ev.survival_many(a, 1.0) - ev.survival_many(b, 1.0))
    pos = dk > 0
    slope = np.polyfit(np.log(h[pos]), np.log(dk[pos]), 1)[0]
    alpha = float(min(1.0, max(slope, 1e-3)))
    q = dk / (h**alpha * (1.0 + np.linalg.norm(b, axis=1) ** (u.p - 1)))
    report.holder_alpha = alpha
    report.holder_quotient_max = float(q.max())

    # finite-difference time derivative against its Gaussian envelope (beta = 1)
    t, dt = 1.0, 1e-4
    xs = cone.sample(rng, 50, radius=3.0, min_dist=0.05)
    ys = cone.sample(rng, 50, radius=3.0, min_dist=0.05)
    worst = 0.0
    for x, y in zip(xs, ys):
        dK = (ev.kernel(x, y, t + dt) - ev.kernel(x, y, t - dt)) / (2 * dt)
        if cone.dim <= 2 or isinstance(cone, HalfSpace):
            vv = math.sqrt(ball_cone_volume(cone, x, 1.0) * ball_cone_volume(cone, y, 1.0))
        else:
            vv = apex_ball_volume(cone)
        d2 = float(((x - y) ** 2).sum())
        env = ev.survival(x, t) * ev.survival(y, t) / (t * vv) * (1 + d2 / t) ** 2 * math.exp(-d2 / (4 * t))
        worst = max(worst, abs(dK) / env)
    report.time_derivative_max = worst
    return report
