import math

import numpy as np
import pytest

from topoc.filtration import FiltrationField
from topoc.persistence import PersistenceDiagram

# Diagrams of the 5x5 worked example, in its unscaled 1..5 units.
WORKED_PD0 = PersistenceDiagram(0, [(1, math.inf), (1, 2), (1, 2), (1, 3)])
WORKED_PD1 = PersistenceDiagram(1, [(2, 4), (3, 5), (4, 5)])

# A 5x5 field (values 1..5) whose diagrams are exactly the worked example's;
# found by search, the figure's own pixel values are not available.
EXAMPLE_FIELD = np.array(
    [
        [3, 3, 4, 1, 4],
        [5, 3, 3, 3, 3],
        [1, 1, 5, 2, 3],
        [4, 5, 2, 4, 2],
        [1, 2, 1, 1, 2],
    ]
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, rows, cols, hi=766):
    return FiltrationField(rng.integers(0, hi, size=(rows, cols)))


class TimedFeatures(tuple):
    """(X, labels, splits) plus the wall time spent generating and extracting them."""

    def __new__(cls, items, seconds):
        obj = super().__new__(cls, items)
        obj.seconds = seconds
        return obj


def loss_increases(history, rtol=1e-12):
    """Rounds whose loss rose by more than floating-point summation noise."""
    return sum(b > a + rtol * abs(a) for a, b in zip(history, history[1:]))


@pytest.fixture(scope="session")
def synthetic_features():
    """Features of the blob/ring generator: 400 images per class, 64x64, 70:30 split."""
    import time

    from topoc.synthetic import synthetic_dataset
    from topoc.vectorize import topo_feature_vector

    start = time.perf_counter()
    images, labels, splits = synthetic_dataset(n_per_class=400, size=64, seed=2024)
    X = np.array([topo_feature_vector(im).values for im in images], dtype=np.float64)
    return TimedFeatures((X, np.array(labels), np.array(splits)), time.perf_counter() - start)


_ACCEPTANCE = []


@pytest.fixture
def accept():
    """Record one acceptance line: ``accept(n, name, ok, detail)``; returns ``ok``."""

    def record(n, name, ok, detail=""):
        _ACCEPTANCE.append((n, name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {name}: {detail}")
