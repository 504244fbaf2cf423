import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mouseforest.forest import PointSet  # noqa: E402
from mouseforest.synth.dataset import make_synth_set  # noqa: E402
from mouseforest.synth.render import Camera  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def blobs(n, seed=0):
    """Two overlapping classes in the unit square."""
    r = np.random.default_rng(seed)
    y = r.integers(0, 2, n)
    centers = np.array([[0.3, 0.4], [0.65, 0.6]])
    X = centers[y] + r.normal(0, 0.15, (n, 2))
    return PointSet(X, y)


@pytest.fixture(scope="session")
def small_synth():
    """A handful of rendered mice shared by the pose tests."""
    return make_synth_set(12, 5, "fixture", Camera())


# acceptance criteria verdicts, printed once at the end of the session
CRITERIA: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
