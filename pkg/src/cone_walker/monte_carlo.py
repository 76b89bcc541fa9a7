"""Seeded Monte Carlo for killed walks, reproducible under any thread count.

Samples are grouped into fixed-size blocks.  Block ``b`` of a run with seed
``s`` draws from a Philox generator keyed by ``(s, b)``, so the random stream
of every sample depends only on ``(seed, block, position in block)``.  Blocks
may run on any number of threads; their partial moments are merged in block
order, which makes every estimate bit-for-bit independent of scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .cone_geometry import ConeSpec, ShrunkenConeQuery, transform_cone
from .errors import StartOutsideCone
from .walk_model import LinearTransform, StepDistribution

BLOCK_SIZE = 1 << 14
_MASK64 = (1 << 64) - 1


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CONE_WALKER_THREADS", "1")))
    except ValueError:
        return 1


def substream(seed: int, block: int) -> np.random.Generator:
    """Generator for one block; the Philox key packs ``seed`` and ``block``."""
    return np.random.Generator(np.random.Philox(key=(int(block) << 64) | (int(seed) & _MASK64)))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int
    substream_count: int
    censored_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "se": self.std_error,
            "samples": self.samples,
            "seed": self.seed,
            "substreams": self.substream_count,
            "censored_fraction": self.censored_fraction,
        }


class AliasTable:
    """Walker/Vose alias table: O(1) draws from a finite distribution."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        k = len(p)
        scaled = p * k / p.sum()
        self.prob = np.ones(k)
        self.alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        i = rng.integers(0, len(self.prob), size)
        keep = rng.random(size) < self.prob[i]
        return np.where(keep, i, self.alias[i])


# -- block runner -------------------------------------------------------------

def run_blocks(
    kernel: Callable[[np.random.Generator, int], np.ndarray],
    samples: int,
    seed: int,
    threads: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Run ``kernel(rng, count)`` over all blocks; return column means, SEs and block count.

    ``kernel`` returns a ``(count, k)`` array of per-sample values.  Block
    moments are merged in block order with Chan's update.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    blocks = -(-samples // block_size)
    sizes = [min(block_size, samples - b * block_size) for b in range(blocks)]

    def one(b: int):
        vals = np.atleast_2d(np.asarray(kernel(substream(seed, b), sizes[b]), dtype=float))
        if vals.shape[0] != sizes[b]:
            vals = vals.T
        mean = vals.mean(axis=0)
        m2 = ((vals - mean) ** 2).sum(axis=0)
        return sizes[b], mean, m2

    threads = threads or default_threads()
    if threads > 1 and blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(blocks)))
    else:
        parts = [one(b) for b in range(blocks)]
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta**2 * (n * nb / tot)
        n = tot
    var = m2 / (n - 1) if n > 1 else np.zeros_like(m2)
    return mean, np.sqrt(var / n), blocks


def _estimate(mean, se, samples, seed, blocks, col=0, censored=0.0) -> MCEstimate:
    return MCEstimate(float(mean[col]), float(se[col]), samples, seed, blocks, float(censored))


def _check_start(model: StepDistribution, cone: ConeSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if len(x) != model.dim:
        raise ValueError("start point dimension differs from the model")
    if not cone.contains(x):
        raise StartOutsideCone(f"start {tuple(int(c) for c in x)} is not in the open cone")
    return x


# -- walk statistics ----------------------------------------------------------

def _simulate_endpoints(model, cone, x, n):
    """Kernel factory: per sample, final position and survival flag after ``n`` steps."""
    steps = model.int_vectors
    table = AliasTable(model.probabilities)

    def run(rng, count):
        pos = np.tile(x, (count, 1))
        alive = np.ones(count, dtype=bool)
        for _ in range(n):
            pos += steps[table.sample(rng, count)]
            alive &= cone.contains_many(pos)
        return pos, alive

    return run


def mc_survival(model, cone, x, n, samples, seed, threads=None) -> MCEstimate:
    """Estimate ``P(tau_x > n)``."""
    x = _check_start(model, cone, x)
    if n == 0:
        return MCEstimate(1.0, 0.0, samples, seed, 0)
    sim = _simulate_endpoints(model, cone, x, n)
    mean, se, blocks = run_blocks(lambda rng, c: sim(rng, c)[1][:, None], samples, seed, threads)
    return _estimate(mean, se, samples, seed, blocks)


def mc_local_probabilities(model, cone, x, ys, n, samples, seed, threads=None) -> list[MCEstimate]:
    """Estimate ``P(x + S(n) = y, tau_x > n)`` for each ``y`` from one set of paths."""
    x = _check_start(model, cone, x)
    targets = np.asarray(ys, dtype=np.int64).reshape(len(ys), model.dim)
    sim = _simulate_endpoints(model, cone, x, n)

    def kernel(rng, count):
        pos, alive = sim(rng, count)
        hits = (pos[:, None, :] == targets[None, :, :]).all(axis=2)
        return hits & alive[:, None]

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return [_estimate(mean, se, samples, seed, blocks, col=k) for k in range(len(targets))]


def _decorrelated_cone(cone, transform):
    if transform is None:
        return cone, np.eye(cone.dim)
    return transform_cone(cone, transform), np.asarray(transform.matrix, dtype=float)


def mc_boundary_functional(
    model: StepDistribution,
    cone: ConeSpec,
    u,
    y,
    n: int,
    epsilon: float,
    samples: int,
    seed: int,
    transform: LinearTransform | None = None,
    threads: int | None = None,
) -> MCEstimate:
    """Estimate ``E[u(y_eps(n) / sqrt n); t_{y,eps}(n) <= tau_y]``.

    Pass the reversed model to get the primed quantity.  ``cone`` and ``y``
    are in lattice coordinates; the shrunken cone and ``u`` are evaluated
    after applying ``transform``.  Paths that neither exit nor enter the
    shrunken cone within ``n`` steps are censored (contribute 0).
    """
    y = _check_start(model, cone, y)
    dcone, m = _decorrelated_cone(cone, transform)
    thr = ShrunkenConeQuery(n, epsilon).threshold
    scale = 1.0 / math.sqrt(n)
    y_dec = m @ y
    if dcone.dist_boundary(y_dec) >= thr:
        return MCEstimate(float(u(y_dec * scale)), 0.0, samples, seed, 0, 0.0)
    steps = model.int_vectors
    table = AliasTable(model.probabilities)

    def kernel(rng, count):
        pos = np.tile(y, (count, 1))
        active = np.ones(count, dtype=bool)
        value = np.zeros(count)
        for _ in range(n):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            # draws are made for every sample so streams do not depend on history
            pos += steps[table.sample(rng, count)]
            p = pos[idx]
            alive = cone.contains_many(p)
            dec = p[alive] @ m.T
            entered = dcone.dist_many(dec) >= thr
            hit = idx[alive][entered]
            value[hit] = u.values(dec[entered] * scale) if hasattr(u, "values") else [u(v) for v in dec[entered] * scale]
            active[idx[~alive]] = False
            active[hit] = False
        return np.column_stack([value, active])

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return _estimate(mean, se, samples, seed, blocks, censored=mean[1])


@dataclass(frozen=True)
class TailEstimate:
    frequency: float
    lower: float
    upper: float
    count: int
    samples: int
    seed: int
    horizon: int

    def to_dict(self) -> dict:
        return {
            "frequency": self.frequency,
            "ci_lower": self.lower,
            "ci_upper": self.upper,
            "count": self.count,
            "samples": self.samples,
            "seed": self.seed,
            "horizon": self.horizon,
        }


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def mc_stopping_time_tail(
    model, cone, x, n, epsilon, samples, seed, transform=None, threads=None
) -> TailEstimate:
    """Frequency of ``{t_{x,eps}(n) >= n^(1-eps), tau_x >= n^(1-eps)}``.

    With ``m = ceil(n^(1-eps))`` the event says the walk is alive at time
    ``m - 1`` and has not visited the shrunken cone at times ``0..m-1``.
    """
    x = _check_start(model, cone, x)
    dcone, mat = _decorrelated_cone(cone, transform)
    thr = ShrunkenConeQuery(n, epsilon).threshold
    horizon = math.ceil(n ** (1.0 - epsilon) - 1e-12)
    if dcone.dist_boundary(mat @ x) >= thr:
        return TailEstimate(0.0, *clopper_pearson(0, samples), 0, samples, seed, horizon)
    steps = model.int_vectors
    table = AliasTable(model.probabilities)

    def kernel(rng, count):
        pos = np.tile(x, (count, 1))
        flag = np.ones(count, dtype=bool)
        for _ in range(horizon - 1):
            pos += steps[table.sample(rng, count)]
            alive = cone.contains_many(pos)
            entered = np.zeros(count, dtype=bool)
            entered[alive] = dcone.dist_many(pos[alive] @ mat.T) >= thr
            flag &= alive & ~entered
        return flag[:, None]

    mean, _, _ = run_blocks(kernel, samples, seed, threads)
    k = int(round(mean[0] * samples))
    return TailEstimate(k / samples, *clopper_pearson(k, samples), k, samples, seed, horizon)


def fuk_nagaev_bound(x_thresh: float, y_thresh: float, n: int, d: int) -> float:
    """``2d exp(x/(sqrt(d) y)) (sqrt(d) n / (x y))^(x/(sqrt(d) y))``."""
    if x_thresh <= 0:
        return 2.0 * d
    a = x_thresh / (math.sqrt(d) * y_thresh)
    return 2.0 * d * math.exp(a + a * math.log(math.sqrt(d) * n / (x_thresh * y_thresh)))


def mc_fuk_nagaev(
    model, x_thresh, y_thresh, n, samples, seed, threads=None
) -> tuple[MCEstimate, float]:
    """Empirical ``P(|S(n)| > x, max_k |X(k)| <= y)`` against the analytic bound.

    ``model`` should be decorrelated (identity covariance), which the bound assumes.
    """
    if y_thresh <= 0:
        raise ValueError("y_thresh must be positive")
    vecs = model.vectors
    norms = np.linalg.norm(vecs, axis=1)
    table = AliasTable(model.probabilities)

    def kernel(rng, count):
        pos = np.zeros((count, model.dim))
        ok = np.ones(count, dtype=bool)
        for _ in range(n):
            i = table.sample(rng, count)
            pos += vecs[i]
            ok &= norms[i] <= y_thresh
        return (ok & (np.linalg.norm(pos, axis=1) > x_thresh))[:, None]

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return _estimate(mean, se, samples, seed, blocks), fuk_nagaev_bound(x_thresh, y_thresh, n, model.dim)


def mc_max_displacement_moment(
    model, cone, x, n, epsilon, alpha, samples, seed, transform=None, threads=None
) -> MCEstimate:
    """Estimate ``E[(S+)^alpha; S+ >= n^(1/2 - eps/8)]``.

    ``S+`` is the largest ``|S(l)|`` (decorrelated) over ``1 <= l <= n^(1-eps)``
    with ``tau_x > l``; it is 0 when the walk dies at the first step.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    x = _check_start(model, cone, x)
    _, mat = _decorrelated_cone(cone, transform)
    horizon = int(math.floor(n ** (1.0 - epsilon) + 1e-12))
    level = n ** (0.5 - epsilon / 8.0)
    steps = model.int_vectors
    table = AliasTable(model.probabilities)

    def kernel(rng, count):
        disp = np.zeros((count, model.dim), dtype=np.int64)
        alive = np.ones(count, dtype=bool)
        best = np.zeros(count)
        for _ in range(horizon):
            disp += steps[table.sample(rng, count)]
            alive &= cone.contains_many(disp + x)
            r = np.linalg.norm(disp @ mat.T, axis=1)
            best = np.where(alive, np.maximum(best, r), best)
        return np.where(best >= level, best**alpha, 0.0)[:, None]

    mean, se, blocks = run_blocks(kernel, samples, seed, threads)
    return _estimate(mean, se, samples, seed, blocks)
