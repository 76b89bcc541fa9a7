"""Exact layer-by-layer propagation of the killed walk.

Layer ``n`` holds ``P(x + S(n) = y, tau_x > n)`` for every lattice ``y``.
Two back ends share the :class:`LayerTable` contract:

* rational mode -- a ``dict`` of ``Fraction`` masses, no truncation, exact;
* float mode -- a dense ``numpy`` array over a box (the truncation window)
  trimmed to the cone, advanced by shifted slice additions.

Mass that steps outside ``K`` is *absorbed*; mass that steps inside ``K``
but outside the window is dropped and added to ``truncation_loss``.  The
dropped amount bounds the error of every later probability, because the
descendants of the discarded mass can never weigh more than it did.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .cone_geometry import ConeSpec
from .errors import ModelError, StartOutsideCone
from .walk_model import LinearTransform, StepDistribution


# -- truncation ---------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    """Axis-aligned box of lattice points, bounds inclusive."""

    lo: tuple
    hi: tuple

    def contains(self, point) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, point, self.hi))


def auto_radius(model: StepDistribution, n: int, tol: float = 1e-13) -> int:
    """Radius ``r`` with ``P(max_{k<=n} |S(k)|_inf >= r) <= tol``.

    Uses the Bernstein bound ``2 exp(-r^2 / (2 (n s^2 + b r / 3)))`` per
    coordinate and sign (valid for the running maximum through Doob's
    inequality on the exponential martingale), with ``s^2`` the largest
    coordinate variance and ``b`` the largest coordinate jump.  Grows like
    ``sqrt(n log(1/tol))``.
    """
    if n <= 0:
        return 0
    var = float(np.max(np.diag(model.covariance())))
    b = model.max_step
    c = 2.0 * math.log(2.0 * model.dim / tol)
    r = (c * b / 3.0 + math.sqrt((c * b / 3.0) ** 2 + 4.0 * c * n * var)) / 2.0
    return int(math.ceil(r))


@dataclass(frozen=True)
class TruncationPolicy:
    """``full`` (exact reach box), ``auto`` (tail-bound radius) or ``radius:R``."""

    kind: str = "auto"
    radius: int | None = None
    tol: float = 1e-13

    def __post_init__(self):
        if self.kind not in ("full", "auto", "radius"):
            raise ValueError(f"unknown truncation policy {self.kind!r}")
        if self.kind == "radius" and (self.radius is None or self.radius < 0):
            raise ValueError("radius policy needs a nonnegative radius")

    @classmethod
    def parse(cls, text: str) -> "TruncationPolicy":
        text = text.strip().lower()
        if text in ("full", "auto"):
            return cls(text)
        if text.startswith("radius:"):
            return cls("radius", int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse window {text!r}; use auto, full or radius:R")

    def window(self, model: StepDistribution, x: Sequence[int], n_max: int) -> Window:
        reach = int(n_max * model.max_step)
        if self.kind == "full":
            r = reach
        elif self.kind == "radius":
            r = min(self.radius, reach)
        else:
            r = min(auto_radius(model, n_max, self.tol), reach)
        return Window(tuple(c - r for c in x), tuple(c + r for c in x))


# -- layer tables -------------------------------------------------------------

class DenseMasses(Mapping):
    """Read-only point -> mass view over a dense box array (nonzero entries only)."""

    def __init__(self, array: np.ndarray, origin: Sequence[int]):
        self.array = array
        self.origin = tuple(int(c) for c in origin)

    def _index(self, point):
        idx = tuple(int(c) - o for c, o in zip(point, self.origin))
        if len(idx) != self.array.ndim or any(i < 0 or i >= s for i, s in zip(idx, self.array.shape)):
            return None
        return idx

    def __getitem__(self, point):
        idx = self._index(point)
        if idx is None or self.array[idx] == 0.0:
            raise KeyError(point)
        return float(self.array[idx])

    def __iter__(self):
        for idx in zip(*np.nonzero(self.array)):
            yield tuple(int(i) + o for i, o in zip(idx, self.origin))

    def __len__(self):
        return int(np.count_nonzero(self.array))

    def total(self) -> float:
        return float(self.array.sum())

    def coordinates(self) -> np.ndarray:
        """Lattice coordinates of every cell, shape ``array.shape + (d,)``."""
        axes = [np.arange(s) + o for s, o in zip(self.array.shape, self.origin)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class LayerTable:
    n: int
    masses: Mapping
    absorbed: float | Fraction = 0.0
    truncation_loss: float | Fraction = 0.0
    window: Window | None = None

    @classmethod
    def initial(cls, x: Sequence[int], exact: bool = False, window: Window | None = None) -> "LayerTable":
        one = Fraction(1) if exact else 1.0
        zero = Fraction(0) if exact else 0.0
        return cls(0, {tuple(int(c) for c in x): one}, zero, zero, window)

    def mass_at(self, y) -> float | Fraction:
        return self.masses.get(tuple(int(c) for c in y), 0)

    def total(self) -> float | Fraction:
        if isinstance(self.masses, DenseMasses):
            return self.masses.total()
        return sum(self.masses.values(), Fraction(0) if isinstance(self.absorbed, Fraction) else 0.0)

    def ledger_error(self) -> float:
        """``|live + absorbed + truncation_loss - 1|``."""
        return abs(float(self.total() + self.absorbed + self.truncation_loss - 1))


def advance_layer(
    table: LayerTable,
    steps: StepDistribution,
    cone: ConeSpec,
    window: Window | None = None,
) -> LayerTable:
    """One Chapman-Kolmogorov step with killing on ``dK`` (sparse, any number type).

    ``window`` defaults to the table's own window; ``None`` means unbounded.
    """
    window = window if window is not None else table.window
    exact = isinstance(table.absorbed, Fraction)
    zero = Fraction(0) if exact else 0.0
    inside: dict[tuple, bool] = {}
    new: dict[tuple, float | Fraction] = {}
    absorbed, trunc = table.absorbed, table.truncation_loss
    for z, m in sorted(table.masses.items()):
        for s, p in steps.steps:
            t = tuple(a + b for a, b in zip(z, s))
            ok = inside.get(t)
            if ok is None:
                ok = inside[t] = cone.contains(t)
            w = m * p
            if not ok:
                absorbed += w
            elif window is not None and not window.contains(t):
                trunc += w
            else:
                new[t] = new.get(t, zero) + w
    return LayerTable(table.n + 1, new, absorbed, trunc, window)


class _DenseRunner:
    """Float-mode propagation on a fixed box (window trimmed to the cone)."""

    def __init__(self, model: StepDistribution, cone: ConeSpec, x: Sequence[int], window: Window):
        self.steps = model.int_vectors
        self.probs = model.probabilities
        d = model.dim
        wlo = np.array(window.lo)
        whi = np.array(window.hi)
        # trim the window to the bounding box of its cone points
        grid = _box_points(wlo, whi)
        ink = cone.contains_many(grid.reshape(-1, d)).reshape(grid.shape[:-1])
        lo, hi = wlo.copy(), whi.copy()
        for ax in range(d):
            other = tuple(a for a in range(d) if a != ax)
            hit = np.nonzero(ink.any(axis=other) if other else ink)[0]
            lo[ax], hi[ax] = wlo[ax] + hit[0], wlo[ax] + hit[-1]
        self.pad = np.abs(self.steps).max(axis=0)
        self.lo, self.hi = lo, hi
        plo, phi = lo - self.pad, hi + self.pad
        self.plo = plo
        pgrid = _box_points(plo, phi)
        self.mask_p = cone.contains_many(pgrid.reshape(-1, d)).reshape(pgrid.shape[:-1])
        self.inner = tuple(slice(int(p), int(p) + int(h - l) + 1) for p, l, h in zip(self.pad, lo, hi))
        in_box = np.zeros_like(self.mask_p)
        in_box[self.inner] = True
        self.live_mask = self.mask_p[self.inner]
        self.trunc_mask = self.mask_p & ~in_box
        self.absorb_mask = ~self.mask_p
        self.shape = tuple(int(h - l) + 1 for l, h in zip(lo, hi))
        self.src = [
            tuple(slice(int(p + c), int(p + c) + n) for p, c, n in zip(self.pad, s, self.shape)) for s in self.steps
        ]

    def initial(self, x) -> np.ndarray:
        a = np.zeros(self.shape)
        a[tuple(int(c - l) for c, l in zip(x, self.lo))] = 1.0
        return a

    def step(self, a: np.ndarray) -> tuple[np.ndarray, float, float]:
        big = np.zeros(self.mask_p.shape)
        for sl, p in zip(self.src, self.probs):
            big[sl] += p * a
        new = np.where(self.live_mask, big[self.inner], 0.0)
        return new, float(big[self.absorb_mask].sum()), float(big[self.trunc_mask].sum())


def _box_points(lo, hi) -> np.ndarray:
    axes = [np.arange(int(a), int(b) + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _check_start(model: StepDistribution, cone: ConeSpec, x) -> tuple:
    if not model.integral:
        raise ModelError("exact propagation needs integer steps")
    x = tuple(int(c) for c in x)
    if len(x) != model.dim or cone.dim != model.dim:
        raise ModelError("start point, model and cone dimensions differ")
    if not cone.contains(x):
        raise StartOutsideCone(f"start {x} is not in the open cone")
    return x


def iterate_layers(
    model: StepDistribution,
    cone: ConeSpec,
    x: Sequence[int],
    n_max: int,
    mode: str = "float",
    trunc: TruncationPolicy | None = None,
) -> Iterator[LayerTable]:
    """Yield layers ``0..n_max``.

    Rational mode ignores ``trunc`` (its window is always the full reach),
    so ``truncation_loss`` is identically zero there.
    """
    x = _check_start(model, cone, x)
    if mode == "rational":
        if not model.exact:
            raise ModelError("rational mode needs exact (rational) probabilities")
        table = LayerTable.initial(x, exact=True)
        yield table
        for _ in range(n_max):
            table = advance_layer(table, model, cone, None)
            yield table
        return
    if mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    trunc = trunc or TruncationPolicy()
    window = trunc.window(model, x, n_max)
    runner = _DenseRunner(model, cone, x, window)
    a = runner.initial(x)
    absorbed = trunc_loss = 0.0
    yield LayerTable(0, DenseMasses(a, runner.lo), 0.0, 0.0, window)
    for n in range(1, n_max + 1):
        a, da, dt = runner.step(a)
        absorbed += da
        trunc_loss += dt
        yield LayerTable(n, DenseMasses(a, runner.lo), absorbed, trunc_loss, window)


# -- derived quantities -------------------------------------------------------

@dataclass(frozen=True)
class LocalProbability:
    value: float | Fraction
    truncation_loss: float | Fraction


@dataclass(frozen=True)
class SurvivalSeries:
    x: tuple
    values: list
    truncation_loss: list = field(default_factory=list)


@dataclass(frozen=True)
class GreenPartial:
    value: float | Fraction
    tail_estimate: float
    truncation_loss: float | Fraction


@dataclass(frozen=True)
class HarmonicVSequence:
    x: tuple
    values: list
    diagnostic: float  # |v_N - v_{N/2}| / v_N


def local_probability(model, cone, x, y, n, mode="float", trunc=None) -> LocalProbability:
    """``P(x + S(n) = y, tau_x > n)`` with the truncation bound alongside."""
    last = None
    for last in iterate_layers(model, cone, x, n, mode, trunc):
        pass
    return LocalProbability(last.mass_at(y), last.truncation_loss)


def local_series(model, cone, x, y, n_max, mode="float", trunc=None) -> tuple[list, list]:
    vals, losses = [], []
    for t in iterate_layers(model, cone, x, n_max, mode, trunc):
        vals.append(t.mass_at(y))
        losses.append(t.truncation_loss)
    return vals, losses


def survival(model, cone, x, n_max, mode="float", trunc=None) -> SurvivalSeries:
    """``P(tau_x > n)`` for ``n = 0..n_max``."""
    vals, losses = [], []
    for t in iterate_layers(model, cone, x, n_max, mode, trunc):
        vals.append(t.total())
        losses.append(t.truncation_loss)
    return SurvivalSeries(tuple(int(c) for c in x), vals, losses)


def green_partial(model, cone, x, y, n_max, mode="float", trunc=None) -> GreenPartial:
    """``sum_{n<=N} P(x+S(n)=y, tau_x>n)`` plus a power-law tail estimate.

    The tail is extrapolated from a log-log fit of the nonzero terms in the
    second half of the range (the decay exponent is expected to exceed 1).
    """
    vals, losses = local_series(model, cone, x, y, n_max, mode, trunc)
    total = sum(vals, Fraction(0) if mode == "rational" else 0.0)
    return GreenPartial(total, _power_tail(vals), losses[-1])


def _power_tail(vals: list) -> float:
    n_max = len(vals) - 1
    half = [(n, float(v)) for n, v in enumerate(vals) if n >= max(1, n_max // 2) and v > 0]
    if len(half) < 3:
        return 0.0
    ns = np.array([h[0] for h in half], dtype=float)
    vs = np.array([h[1] for h in half])
    slope, intercept = np.polyfit(np.log(ns), np.log(vs), 1)
    if slope >= -1.0:
        return math.inf
    density = len(half) / (n_max - max(1, n_max // 2) + 1)
    c = math.exp(intercept)
    return density * c * (n_max + 0.5) ** (slope + 1) / (-slope - 1)


def harmonic_V(
    model: StepDistribution,
    cone: ConeSpec,
    u: Callable,
    x,
    n_max: int,
    transform: LinearTransform | None = None,
    mode: str = "float",
    trunc: TruncationPolicy | None = None,
) -> HarmonicVSequence:
    """``v_n = E[u(x + S(n)); tau_x > n]`` for ``n = 0..n_max``.

    ``u`` acts on decorrelated coordinates; ``transform`` maps lattice points
    there (identity when omitted).  ``u`` may be a :class:`ReduiteFn` or any
    callable accepting a point.
    """
    m = transform.matrix if transform is not None else None

    def u_many(points: np.ndarray) -> np.ndarray:
        pts = points.astype(float)
        if m is not None:
            pts = pts @ m.T
        if hasattr(u, "values"):
            return u.values(pts)
        return np.array([u(p) for p in pts])

    values = []
    grid_u = None
    for t in iterate_layers(model, cone, x, n_max, mode, trunc):
        if isinstance(t.masses, DenseMasses):
            if grid_u is None:
                coords = t.masses.coordinates()
                grid_u = u_many(coords.reshape(-1, model.dim)).reshape(coords.shape[:-1])
            values.append(float((t.masses.array * grid_u).sum()))
        else:
            pts = sorted(t.masses)
            uv = u_many(np.array(pts, dtype=float))
            values.append(sum(float(t.masses[p]) * w for p, w in zip(pts, uv)))
    v_n = values[-1]
    v_half = values[len(values) // 2] if n_max >= 2 else values[0]
    diag = abs(v_n - v_half) / abs(v_n) if v_n else math.inf
    return HarmonicVSequence(tuple(int(c) for c in x), values, diag)


def excursion_count(stepset, cone: ConeSpec, x, y, n: int, closed: bool = False) -> int:
    """Number of length-``n`` paths ``x -> y`` with unit step weights confined to the cone.

    ``closed=True`` allows boundary points (the combinatorial convention for
    walks in ``N^d``); otherwise the cone is open like everywhere else.
    """
    steps = [tuple(int(c) for c in s) for s in stepset]
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    allowed = cone.contains_closed if closed else cone.contains
    if not allowed(x):
        return 0
    cache: dict[tuple, bool] = {}
    layer = {x: 1}
    for _ in range(n):
        new: dict[tuple, int] = {}
        for z, c in layer.items():
            for s in steps:
                t = tuple(a + b for a, b in zip(z, s))
                ok = cache.get(t)
                if ok is None:
                    ok = cache[t] = allowed(t)
                if ok:
                    new[t] = new.get(t, 0) + c
        layer = new
    return layer.get(y, 0)
