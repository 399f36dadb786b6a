import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from emdscale.emd import Decomposition, Imf
from emdscale.series import Signal

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def make_decomposition(periods, variances, length=1000, residue=None):
    """Decomposition carrying only the per-IMF statistics the scaling fits read."""
    imfs = []
    for k, (p, v) in enumerate(zip(periods, variances), start=1):
        zc = 0 if p is None else int(round(length / p))
        imfs.append(Imf(values=np.zeros(length), index_k=k, zero_crossings=zc, extrema_count=zc,
                        period_samples=p, variance=v))
    res = np.zeros(length) if residue is None else residue
    return Decomposition(source=Signal(np.zeros(length)), imfs=imfs, residue=res)


@pytest.fixture
def two_tone():
    t = np.arange(2000)
    fast = np.sin(2 * np.pi * t / 20)
    slow = np.sin(2 * np.pi * t / 200)
    return fast, slow


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
