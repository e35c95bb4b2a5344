import numpy as np
import pytest

from hybridfem.rve import RveSpec

# criterion number -> (passed, detail), filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_rve_spec():
    """Coarse 4-inclusion RVE for fast unit tests."""
    return RveSpec(n_inclusions=4, target_elements=800, seed=1)


def random_f(rng, n, amplitude=0.2, symmetric=False):
    """Random deformation gradients ``(n, 2, 2)`` near the identity with det > 0."""
    out = []
    while len(out) < n:
        F = np.eye(2) + rng.uniform(-amplitude, amplitude, (2, 2))
        if symmetric:
            F[1, 0] = F[0, 1]
        if np.linalg.det(F) > 0.2:
            out.append(F)
    return np.array(out)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
