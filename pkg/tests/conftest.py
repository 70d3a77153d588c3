from __future__ import annotations

import numpy as np
import pytest

from fourap.quadratic import QuadraticForm
from fourap.transform import roots_of_unity


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_points(p, translate, basis):
    """All points of ``translate + span(basis)`` by explicit enumeration of coefficients."""
    import itertools

    basis = np.asarray(basis, dtype=np.int64).reshape(-1, len(translate))
    pts = set()
    for coeffs in itertools.product(range(p), repeat=basis.shape[0]):
        x = (np.asarray(translate) + np.asarray(coeffs, dtype=np.int64) @ basis) % p
        pts.add(tuple(int(v) for v in x))
    return pts


def phase(phi: QuadraticForm) -> np.ndarray:
    return roots_of_unity(phi.p)[phi.values_on()]


def pytest_configure(config):
    config._fourap_acceptance = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one summary line per acceptance criterion, printed at the end of the run."""
    return request.config._fourap_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_fourap_acceptance", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
