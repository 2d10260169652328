import math

import numpy as np
import pytest
from hypothesis import settings

from periodic_blasso.operators import GreensFunction, OperatorSpec
from periodic_blasso.sampling import SampleSet, forward, random_sparse_measure, sample_positions

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def exp_spec():
    return OperatorSpec("exponential", 3.0, 2)


@pytest.fixture(scope="session")
def exp_green(exp_spec):
    return GreensFunction(exp_spec)


@pytest.fixture(scope="session")
def sobolev_green():
    return GreensFunction(OperatorSpec("sobolev", 2.0, 2), cutoff=512)


def synthetic_samples(green, K0, seed, L=None, noise=None):
    """Noiseless (or noisy, if ``noise`` is a PSNR) samples of a random measure."""
    from periodic_blasso.sampling import add_noise
    T = green.period
    m = random_sparse_measure(K0, seed, T)
    pos = sample_positions(L or 8 * K0 + 1, seed + 1, T)
    y = forward(m, pos, green)
    if noise is not None:
        y = add_noise(y, noise, seed + 2)
    return m, SampleSet(pos, y, T)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """``record(number, ok, detail)``: log one acceptance line, then assert."""
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
