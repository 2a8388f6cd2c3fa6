from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st


def random_kernel(rng: np.random.Generator, d: int, low: float = 0.2, high: float = 3.0) -> np.ndarray:
    M = rng.uniform(low, high, size=(d, d))
    return (M + M.T) / 2


def random_measure(rng: np.random.Generator, d: int) -> np.ndarray:
    w = rng.uniform(0.2, 1.0, size=d)
    return w / w.sum()


@st.composite
def kernels(draw, max_d: int = 3, low: float = 0.2, high: float = 3.0):
    d = draw(st.integers(1, max_d))
    entries = draw(st.lists(st.floats(low, high), min_size=d * d, max_size=d * d))
    M = np.array(entries).reshape(d, d)
    return (M + M.T) / 2


@st.composite
def supercritical_models(draw, max_d: int = 3):
    """(kappa, mu) with Perron root safely above one."""
    from mtgl.model import perron_root

    d = draw(st.integers(1, max_d))
    kappa = draw(kernels(max_d=d, low=0.3, high=4.0).filter(lambda K: K.shape[0] == d))
    w = np.array(draw(st.lists(st.floats(0.2, 1.0), min_size=d, max_size=d)))
    mu = w / w.sum()
    sig = perron_root(kappa, mu)
    scale = draw(st.floats(1.2, 3.0)) / sig
    return kappa * scale, mu


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
