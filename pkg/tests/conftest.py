import numpy as np
import pytest

from tsdtomo.reps import PAULI, ptm_of_unitary_matrix, rotation_unitary


def random_axis(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_unitary(rng):
    return rotation_unitary(random_axis(rng), rng.uniform(0, 2 * np.pi))


def kraus_ptm(kraus):
    """PTM straight from a Kraus set, T_ab = 1/2 Tr[s_a sum_k K s_b K^dag]."""
    T = np.zeros((4, 4))
    for a in range(4):
        for b in range(4):
            out = sum(K @ PAULI[b] @ K.conj().T for K in kraus)
            T[a, b] = 0.5 * np.trace(PAULI[a] @ out).real
    return T


def random_cptp_ptm(rng, n_unitaries=3, depol_max=0.3):
    """Convex mixture of unitaries, followed by partial depolarization."""
    w = rng.dirichlet(np.ones(n_unitaries))
    T = sum(wi * ptm_of_unitary_matrix(random_unitary(rng)) for wi in w)
    lam = 1.0 - rng.uniform(0, depol_max)
    return np.diag([1.0, lam, lam, lam]) @ T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, name, ok, detail):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
