import functools

import numpy as np
import pytest

from fuzzyfusion.scores import DetectorMeta, ScoreMatrix

ACCEPTANCE_RESULTS = []


def record_criterion(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}" + (f" -- {detail}" if detail else ""))


def make_matrix(scores, labels, names=None, subsets=None, benchmark="B1"):
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    n, m = scores.shape
    names = names or [f"det{j}" for j in range(m)]
    return ScoreMatrix(
        [DetectorMeta(x) for x in names],
        [f"s{i}" for i in range(n)],
        labels,
        [benchmark] * n,
        subsets or ["S1"] * n,
        scores,
    )


@pytest.fixture
def separable():
    """Four samples, one detector: 0.1/0.2 real, 0.8/0.9 fake."""
    return make_matrix([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])


@functools.lru_cache(maxsize=None)
def cached_suite(seed):
    from fuzzyfusion.simulator import complementary_suite

    return complementary_suite(seed)
