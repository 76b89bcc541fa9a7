import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from cone_walker.cone_geometry import HalfSpace, Orthant
from cone_walker.walk_model import lazy_walk, nsew_walk, simple_walk_1d

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def enumerate_paths(model, inside, x, n):
    """Endpoint law of surviving paths by listing every step word (independent oracle).

    ``inside`` is a vectorised predicate on an ``(N, d)`` integer array.
    Returns ``{y: Fraction}``; requires uniform step probabilities.
    """
    vecs = model.int_vectors
    k = len(vecs)
    probs = {p for _, p in model.steps}
    assert len(probs) == 1, "oracle expects a uniform law"
    (p,) = probs
    if n == 0:
        return {tuple(x): Fraction(1)}
    words = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    pos = np.asarray(x, dtype=np.int64) + np.cumsum(vecs[words], axis=1)
    alive = np.ones(len(words), dtype=bool)
    for j in range(n):
        alive &= inside(pos[:, j, :])
    ends = Counter(map(tuple, pos[alive, -1, :].tolist()))
    return {y: c * Fraction(p) ** n for y, c in ends.items()}


@pytest.fixture
def lazy():
    return lazy_walk()


@pytest.fixture
def nsew():
    return nsew_walk()


@pytest.fixture
def simple():
    return simple_walk_1d()


@pytest.fixture
def quadrant():
    return Orthant(2)


@pytest.fixture
def halfline():
    return HalfSpace((1.0,))
