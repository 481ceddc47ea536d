import numpy as np
import pytest

from gkyp.model import FrequencyBand, StateSpace

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE = {}


def record(key, passed, detail):
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def scalar_sys():
    return StateSpace([[-1.0]], [[1.0]])


@pytest.fixture
def unit_band():
    return FrequencyBand(1.0, 2.0)


def gamma_pi(gamma):
    return np.diag([1.0, -gamma**2])


def random_hermitian(rng, d, cplx=True):
    X = rng.standard_normal((d, d))
    if cplx:
        X = X + 1j * rng.standard_normal((d, d))
    return 0.5 * (X + X.conj().T)


def random_psd(rng, d, rank=None, cplx=True):
    rank = d if rank is None else rank
    L = rng.standard_normal((d, rank))
    if cplx:
        L = L + 1j * rng.standard_normal((d, rank))
    return L @ L.conj().T
