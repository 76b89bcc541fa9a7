"""Finite-support lattice step distributions.

A :class:`StepDistribution` is the law of a single increment ``X``.  It can
hold exact rational probabilities (``fractions.Fraction``) or doubles; the
exact form is kept whenever every probability was given exactly, so that the
zero-drift check is an exact identity rather than a tolerance test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DegenerateSupport, ModelError, NonZeroDrift, SingularCovariance

Number = Union[int, float, Fraction]

FLOAT_TOL = 1e-12


def parse_probability(value) -> Fraction | float:
    """Parse ``"a/b"``, a decimal string, or a JSON number."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ModelError(f"invalid probability {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"invalid probability {value!r}") from exc
    raise ModelError(f"invalid probability {value!r}")


def _as_vector(v: Iterable[Number]) -> tuple:
    out = []
    for c in v:
        if isinstance(c, (int, np.integer)) and not isinstance(c, bool):
            out.append(int(c))
        elif isinstance(c, float) and c.is_integer():
            out.append(int(c))
        else:
            out.append(float(c))
    return tuple(out)


@dataclass(frozen=True)
class StepDistribution:
    """Law of one increment: ``steps`` is a tuple of ``(vector, probability)``.

    Duplicated vectors are merged on construction.  Probabilities are either
    all ``Fraction`` (exact mode) or all ``float``.
    """

    steps: tuple
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError("dimension must be positive")
        if not self.steps:
            raise ModelError("empty support")
        merged: dict[tuple, Number] = {}
        exact = all(isinstance(p, (Fraction, int)) for _, p in self.steps)
        for v, p in self.steps:
            v = _as_vector(v)
            if len(v) != self.dim:
                raise ModelError(f"step {v} has dimension {len(v)}, expected {self.dim}")
            p = Fraction(p) if exact else float(p)
            if p <= 0:
                raise ModelError(f"probability of step {v} must be positive, got {p}")
            merged[v] = merged.get(v, 0) + p
        total = sum(merged.values())
        if exact:
            if total != 1:
                raise ModelError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > FLOAT_TOL:
            raise ModelError(f"probabilities sum to {total!r}, not 1 within {FLOAT_TOL}")
        object.__setattr__(self, "steps", tuple(sorted(merged.items())))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[Number], Number]]) -> "StepDistribution":
        pairs = [(tuple(v), parse_probability(p)) for v, p in pairs]
        if not pairs:
            raise ModelError("empty support")
        return cls(tuple(pairs), len(pairs[0][0]))

    @classmethod
    def uniform(cls, vectors: Iterable[Sequence[int]]) -> "StepDistribution":
        vectors = [tuple(v) for v in vectors]
        p = Fraction(1, len(vectors))
        return cls.from_pairs((v, p) for v in vectors)

    @property
    def exact(self) -> bool:
        return isinstance(self.steps[0][1], Fraction)

    @property
    def integral(self) -> bool:
        return all(isinstance(c, int) for v, _ in self.steps for c in v)

    @property
    def vectors(self) -> np.ndarray:
        return np.array([v for v, _ in self.steps], dtype=float)

    @property
    def int_vectors(self) -> np.ndarray:
        if not self.integral:
            raise ModelError("support is not integral")
        return np.array([v for v, _ in self.steps], dtype=np.int64)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([float(p) for _, p in self.steps])

    def mean(self) -> tuple:
        if self.exact and self.integral:
            return tuple(sum((p * v[i] for v, p in self.steps), Fraction(0)) for i in range(self.dim))
        return tuple(self.probabilities @ self.vectors)

    def covariance(self) -> np.ndarray:
        x = self.vectors
        w = self.probabilities
        mu = w @ x
        xc = x - mu
        return (xc * w[:, None]).T @ xc

    def covariance_exact(self) -> list[list[Fraction]]:
        if not (self.exact and self.integral):
            raise ModelError("exact covariance needs rational probabilities and integer steps")
        mu = self.mean()
        d = self.dim
        return [
            [sum((p * (v[i] - mu[i]) * (v[j] - mu[j]) for v, p in self.steps), Fraction(0)) for j in range(d)]
            for i in range(d)
        ]

    @property
    def max_step(self) -> float:
        """Largest L-infinity norm in the support."""
        return float(np.abs(self.vectors).max())

    @property
    def max_norm(self) -> float:
        return float(np.linalg.norm(self.vectors, axis=1).max())

    def to_dict(self) -> dict:
        def fmt(p):
            return f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else p

        return {"dim": self.dim, "steps": [{"v": list(v), "p": fmt(p)} for v, p in self.steps]}

    @classmethod
    def from_dict(cls, data: dict) -> "StepDistribution":
        try:
            dim = int(data["dim"])
            raw = [(tuple(s["v"]), parse_probability(s["p"])) for s in data["steps"]]
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model description: {exc}") from exc
        if any(isinstance(p, float) for _, p in raw):
            raw = [(v, float(p)) for v, p in raw]
        return cls(tuple(raw), dim)


def load_model(path: str | Path) -> StepDistribution:
    with open(path) as fh:
        return StepDistribution.from_dict(json.load(fh))


@dataclass(frozen=True)
class LinearTransform:
    """Invertible linear map ``x -> matrix @ x``."""

    matrix: np.ndarray
    inverse: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transform must be a square matrix")
        inv = np.linalg.inv(m) if self.inverse is None else np.array(self.inverse, dtype=float)
        if not np.allclose(m @ inv, np.eye(len(m)), atol=1e-12, rtol=0):
            raise ValueError("matrix and inverse do not match")
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls, d: int) -> "LinearTransform":
        return cls(np.eye(d), np.eye(d))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def scalar(self) -> float | None:
        """The factor ``c`` if the map is ``c * identity``, else ``None``."""
        c = self.matrix[0, 0]
        if np.allclose(self.matrix, c * np.eye(self.dim), atol=1e-14 * max(1.0, abs(c)), rtol=0):
            return float(c)
        return None

    def apply(self, points) -> np.ndarray:
        """Map a point or an ``(N, d)`` array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T


@dataclass(frozen=True)
class ModelReport:
    mean: tuple
    covariance: np.ndarray
    period: int
    sublattice_basis: tuple
    aperiodic: bool
    moments_finite: bool
    reverse_reachability_hint: bool | None
    return_lengths: tuple = ()
    # index in Z^d of the lattice spanned by step differences; the density
    # factor of the unconstrained local limit theorem for periodic walks
    difference_index: int = 1

    def to_dict(self) -> dict:
        return {
            "mean": [str(m) if isinstance(m, Fraction) else float(m) for m in self.mean],
            "covariance": np.asarray(self.covariance).tolist(),
            "period": self.period,
            "sublattice_basis": [list(r) for r in self.sublattice_basis],
            "aperiodic": self.aperiodic,
            "moments_finite": self.moments_finite,
            "reverse_reachability_hint": self.reverse_reachability_hint,
            "return_lengths": list(self.return_lengths),
            "difference_index": self.difference_index,
        }


def lattice_basis(generators: Iterable[Sequence[int]], dim: int) -> list[list[int]]:
    """Hermite normal form rows of the integer lattice spanned by ``generators``."""
    rows = [list(map(int, g)) for g in generators if any(g)]
    basis: list[list[int]] = []
    for col in range(dim):
        while True:
            nz = [r for r in rows if r[col] != 0]
            if len(nz) <= 1:
                break
            pivot = min(nz, key=lambda r: abs(r[col]))
            for r in nz:
                if r is not pivot:
                    q = r[col] // pivot[col]
                    for k in range(dim):
                        r[k] -= q * pivot[k]
            rows = [r for r in rows if any(r)]
        nz = [r for r in rows if r[col] != 0]
        if nz:
            piv = nz[0]
            rows.remove(piv)
            if piv[col] < 0:
                piv = [-c for c in piv]
            basis.append(piv)
    # reduce entries above each pivot
    for i, row in enumerate(basis):
        col = next(k for k in range(dim) if row[k] != 0)
        for above in basis[:i]:
            q = above[col] // row[col]
            for k in range(dim):
                above[k] -= q * row[k]
    return basis


def _lattice_index(basis: list[list[int]], dim: int) -> int:
    # Hermite rows are triangular: the index is the product of the pivots
    if len(basis) < dim:
        return 0
    return abs(math.prod(row[i] for i, row in enumerate(basis)))


def in_lattice(basis: list[list[int]], v: Sequence[int]) -> bool:
    """Membership in the lattice with full-rank Hermite basis ``basis``."""
    v = [int(c) for c in v]
    for i, row in enumerate(basis):
        q, r = divmod(v[i], row[i])
        if r:
            return False
        v = [a - q * b for a, b in zip(v, row)]
    return not any(v)


def in_step_class(steps: StepDistribution, displacement: Sequence[int], n: int) -> bool:
    """Whether ``displacement`` lies in the coset reachable by the free walk in ``n`` steps.

    That coset is ``n s_0 + L`` with ``L`` spanned by step differences.
    """
    vecs = [v for v, _ in steps.steps]
    s0 = vecs[0]
    diffs = [tuple(a - b for a, b in zip(v, s0)) for v in vecs[1:]]
    basis = lattice_basis(diffs, steps.dim)
    if len(basis) < steps.dim:
        raise DegenerateSupport("step differences do not span a full-rank lattice")
    return in_lattice(basis, [int(c) - n * int(s) for c, s in zip(displacement, s0)])


def return_lengths(steps: StepDistribution, max_word_length: int) -> list[int]:
    """Word lengths ``k <= max_word_length`` for which some word returns to 0."""
    support = [v for v, _ in steps.steps]
    origin = (0,) * steps.dim
    frontier = {origin}
    found = []
    for k in range(1, max_word_length + 1):
        frontier = {tuple(a + b for a, b in zip(z, v)) for z in frontier for v in support}
        if origin in frontier:
            found.append(k)
    return found


def validate_model(steps: StepDistribution, cone=None, max_word_length: int | None = None) -> ModelReport:
    """Check the lattice, zero-drift and non-degeneracy hypotheses.

    The period is the gcd of the lengths of words over the support that
    return to the origin, searched up to ``max_word_length`` (default
    ``2 * (d + 2)``).  When ``cone`` is given, the report also carries the
    sufficient condition ``P(X in -K) > 0`` for strong irreducibility of the
    reversed walk.
    """
    if not steps.integral:
        raise ModelError("lattice model expected: step vectors must be integers")
    d = steps.dim
    mu = steps.mean()
    if steps.exact:
        if any(m != 0 for m in mu):
            raise NonZeroDrift(f"mean {tuple(str(m) for m in mu)} is not zero")
    elif max(abs(m) for m in mu) > FLOAT_TOL:
        raise NonZeroDrift(f"mean {mu} is not zero within {FLOAT_TOL}")

    vecs = [v for v, _ in steps.steps]
    basis = lattice_basis(vecs, d)
    if len(basis) < d:
        raise DegenerateSupport(f"support spans {len(basis)} of {d} dimensions")
    cov = steps.covariance()

    limit = max_word_length if max_word_length is not None else 2 * (d + 2)
    lengths = return_lengths(steps, limit)
    if not lengths:
        raise ModelError(f"no return to the origin within word length {limit}; raise max_word_length")
    period = reduce(math.gcd, lengths)

    diffs = [tuple(a - b for a, b in zip(v, vecs[0])) for v in vecs[1:]]
    diff_basis = lattice_basis(diffs, d) if diffs else []
    diff_index = _lattice_index(diff_basis, d) if len(diff_basis) == d else 0

    det = _lattice_index(basis, d)
    hint = None
    if cone is not None:
        hint = any(cone.contains(tuple(-c for c in v)) for v in vecs)
    return ModelReport(
        mean=mu,
        covariance=cov,
        period=period,
        sublattice_basis=tuple(tuple(r) for r in basis),
        aperiodic=(period == 1 and det == 1),
        moments_finite=True,
        reverse_reachability_hint=hint,
        return_lengths=tuple(lengths),
        difference_index=diff_index,
    )


def decorrelate(steps: StepDistribution) -> tuple[StepDistribution, LinearTransform]:
    """Map the walk to identity covariance with ``M = Q^{-1/2}``.

    Returns the transformed law (real vectors) and ``M``; cones and endpoints
    are mapped with the same ``M`` so that ``M Q M^T = I``.
    """
    q = steps.covariance()
    w, v = np.linalg.eigh(q)
    if w.min() <= 1e-14 * max(1.0, w.max()):
        raise SingularCovariance(f"covariance eigenvalues {w} are not all positive")
    m = (v / np.sqrt(w)) @ v.T
    minv = (v * np.sqrt(w)) @ v.T
    # snap to an exact scalar matrix when the covariance is isotropic
    if np.allclose(w, w[0], rtol=1e-14, atol=0):
        m = np.eye(steps.dim) / math.sqrt(w[0])
        minv = np.eye(steps.dim) * math.sqrt(w[0])
    t = LinearTransform(m, minv)
    new = tuple((tuple(float(c) for c in m @ np.array(vec, dtype=float)), float(p)) for vec, p in steps.steps)
    return StepDistribution(new, steps.dim), t


def reverse(steps: StepDistribution) -> StepDistribution:
    """Law of ``-X``."""
    return StepDistribution(tuple((tuple(-c for c in v), p) for v, p in steps.steps), steps.dim)


# Reference models used throughout the tests and the CLI examples.

def simple_walk_1d() -> StepDistribution:
    return StepDistribution.uniform([(1,), (-1,)])


def nsew_walk() -> StepDistribution:
    return StepDistribution.uniform([(1, 0), (-1, 0), (0, 1), (0, -1)])


def lazy_walk() -> StepDistribution:
    return StepDistribution.uniform([(1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)])


def diagonal_walk() -> StepDistribution:
    return StepDistribution.uniform([(1, 1), (1, -1), (-1, 1), (-1, -1)])
