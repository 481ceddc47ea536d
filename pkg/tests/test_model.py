import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_hermitian, random_psd
from gkyp.errors import DimensionMismatch, InvalidBand, NotHermitian, UncontrollableWarning
from gkyp.model import (
    Certificate,
    FrequencyBand,
    StateSpace,
    Trajectory,
    assemble_hermitian,
    controllability_rank,
    hermitian,
    hermitian_basis,
    matrix_from_json,
    matrix_to_json,
    n_hermitian_params,
    realify,
    symmetrize,
    system_from_json,
    system_to_json,
    trapezoid_weights,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def complex_square(max_dim=5):
    return st.integers(1, max_dim).flatmap(
        lambda d: st.tuples(
            hnp.arrays(float, (d, d), elements=finite),
            hnp.arrays(float, (d, d), elements=finite),
        ).map(lambda ri: ri[0] + 1j * ri[1])
    )


# --- realify ---------------------------------------------------------------

def test_realify_identity():
    R = realify(np.eye(2))
    np.testing.assert_array_equal(R, np.eye(4))
    np.testing.assert_allclose(np.linalg.eigvalsh(R), [1, 1, 1, 1])


def test_realify_pauli_y():
    H = np.array([[0, -1j], [1j, 0]])
    # dense eigensolver on the 2x2 gives {-1, 1}; the embedding doubles each
    base = np.linalg.eigvalsh(H)
    np.testing.assert_allclose(base, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(realify(H)), np.repeat(base, 2), atol=1e-14)


def test_realify_random_3x3_doubles_spectrum():
    rng = np.random.default_rng(3)
    H = random_hermitian(rng, 3)
    want = np.sort(np.repeat(np.linalg.eigvalsh(H), 2))
    np.testing.assert_allclose(np.linalg.eigvalsh(realify(H)), want, atol=1e-10)


def test_realify_is_symmetric_real():
    rng = np.random.default_rng(0)
    R = realify(random_hermitian(rng, 4))
    assert R.dtype.kind == "f"
    np.testing.assert_array_equal(R, R.T)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_realify_preserves_psd_both_ways(d, rank, seed):
    rng = np.random.default_rng(seed)
    H = random_psd(rng, d, rank=min(rank, d))
    if rank > d:
        H = H - rng.uniform(0.1, 2.0) * np.eye(d)
    psd = np.linalg.eigvalsh(H)[0] >= -1e-10 * max(1.0, np.abs(H).max())
    psd_r = np.linalg.eigvalsh(realify(H))[0] >= -1e-10 * max(1.0, np.abs(H).max())
    assert psd == psd_r


# --- Hermitian handling ---------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(complex_square())
def test_symmetrize_idempotent_bitwise(M):
    S = symmetrize(M)
    np.testing.assert_array_equal(symmetrize(S), S)


def test_hermitian_rejects_asymmetric():
    with pytest.raises(NotHermitian):
        hermitian([[1.0, 2.0], [0.0, 1.0]])


def test_hermitian_tolerates_roundoff_and_symmetrizes():
    M = np.array([[1.0, 1.0 + 1e-14], [1.0, 2.0]])
    H = hermitian(M)
    np.testing.assert_array_equal(H, H.conj().T)
    assert not H.flags.writeable


def test_hermitian_rejects_nonsquare_and_nonfinite():
    with pytest.raises(DimensionMismatch):
        hermitian(np.ones((2, 3)))
    with pytest.raises(ValueError):
        hermitian([[np.nan]])


@pytest.mark.parametrize("real", [False, True])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_hermitian_basis_round_trip(n, real):
    basis = hermitian_basis(n, real)
    assert basis.shape == (n_hermitian_params(n, real), n, n)
    for E in basis:
        np.testing.assert_array_equal(E, E.conj().T)
    # the basis is linearly independent over the reals
    flat = np.concatenate([basis.reshape(len(basis), -1).real, basis.reshape(len(basis), -1).imag], 1)
    assert np.linalg.matrix_rank(flat) == len(basis)
    rng = np.random.default_rng(n)
    p = rng.standard_normal(len(basis))
    H = assemble_hermitian(p, n, real)
    np.testing.assert_array_equal(H, H.conj().T)


def test_hermitian_basis_ordering():
    # diagonal, then (re, im) per strict upper entry, row-major
    b = hermitian_basis(2)
    np.testing.assert_array_equal(b[0], [[1, 0], [0, 0]])
    np.testing.assert_array_equal(b[1], [[0, 1], [1, 0]])
    np.testing.assert_array_equal(b[2], [[0, 1j], [-1j, 0]])
    np.testing.assert_array_equal(b[3], [[0, 0], [0, 1]])


# --- controllability ------------------------------------------------------

def test_controllability_scalar_integrator():
    assert controllability_rank(StateSpace([[0.0]], [[1.0]])) == 1


def test_controllability_double_integrator():
    sys = StateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    assert controllability_rank(sys) == 2
    assert sys.controllable


def test_controllability_parallel_krylov():
    sys = StateSpace(np.eye(2), [[1.0], [0.0]])
    assert controllability_rank(sys) == 1
    with pytest.warns(UncontrollableWarning):
        sys.warn_if_uncontrollable()


def test_controllable_no_warning():
    sys = StateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert sys.warn_if_uncontrollable() == 2


def test_state_space_shapes():
    sys = StateSpace([[1.0, 0.0], [0.0, 2.0]], [1.0, 1.0])
    assert (sys.n, sys.m) == (2, 1)
    assert sys.is_real
    with pytest.raises(DimensionMismatch):
        StateSpace(np.eye(2), np.ones((3, 1)))
    with pytest.raises(DimensionMismatch):
        StateSpace(np.ones((2, 3)), np.ones((2, 1)))


def test_state_space_immutable():
    sys = StateSpace([[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        sys.A[0, 0] = 2.0


# --- band -----------------------------------------------------------------

def test_band_derived_quantities():
    b = FrequencyBand(1.0, 3.0)
    assert b.center == 2.0 and b.product == 3.0 and b.width == 2.0
    assert not b.is_symmetric
    assert FrequencyBand(-2.0, 2.0).is_symmetric


@pytest.mark.parametrize("w1,w2", [(1.0, 1.0), (2.0, 1.0), (0.0, np.inf)])
def test_band_rejects_empty_interior(w1, w2):
    with pytest.raises(InvalidBand):
        FrequencyBand(w1, w2)


def test_band_membership_matches_indicator_sign():
    rng = np.random.default_rng(11)
    for _ in range(20):
        w1 = rng.uniform(-5, 5)
        b = FrequencyBand(w1, w1 + rng.uniform(0.01, 5))
        om = rng.uniform(-10, 10, size=1000)
        sign = (om - b.w1) * (om - b.w2)
        np.testing.assert_array_equal(b.contains(om), sign <= 0)
        np.testing.assert_array_equal(b.contains(om), (om >= b.w1) & (om <= b.w2))


def test_band_edges_are_members_not_interior():
    b = FrequencyBand(1.0, 2.0)
    assert b.contains(1.0) and b.contains(2.0)
    assert not b.in_interior(1.0) and b.in_interior(1.5)


# --- certificate / trajectory --------------------------------------------

def test_certificate_validity_rule():
    c = Certificate(np.zeros((1, 1)), np.zeros((1, 1)), lmi_margin=-1.0, q_margin=0.0)
    assert c.valid(1e-9)
    assert not Certificate(np.zeros((1, 1)), np.zeros((1, 1)), 1e-3, 0.0).valid(1e-6)
    assert not Certificate(np.zeros((1, 1)), np.zeros((1, 1)), -1.0, -1e-3).valid(1e-6)
    with pytest.raises(DimensionMismatch):
        Certificate(np.zeros((1, 1)), np.zeros((2, 2)))


def test_trajectory_metrics():
    x = np.array([[0.0], [2.0], [1.0]])
    tr = Trajectory(0.5, x, np.zeros((3, 1)), np.zeros((3, 1)))
    assert tr.num_steps == 2 and tr.horizon == 1.0
    np.testing.assert_array_equal(tr.times, [0.0, 0.5, 1.0])
    assert tr.terminal_decay == 0.5
    assert tr.is_real
    with pytest.raises(DimensionMismatch):
        Trajectory(0.1, np.zeros((3, 1)), np.zeros((2, 1)), np.zeros((3, 1)))


def test_trapezoid_weights():
    np.testing.assert_array_equal(trapezoid_weights(4, 0.5), [0.25, 0.5, 0.5, 0.25])
    np.testing.assert_array_equal(trapezoid_weights(1, 0.5), [0.0])
    assert trapezoid_weights(0, 1.0).size == 0


# --- JSON -----------------------------------------------------------------

def test_matrix_json_round_trip_exact():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    obj = json.loads(json.dumps(matrix_to_json(M)))
    assert obj["rows"] == 2 and obj["cols"] == 3 and len(obj["data"]) == 6
    np.testing.assert_array_equal(matrix_from_json(obj), M)


def test_matrix_json_accepts_plain_reals_and_checks_count():
    np.testing.assert_array_equal(matrix_from_json({"rows": 1, "cols": 2, "data": [1, [2, 3]]}),
                                  [[1, 2 + 3j]])
    with pytest.raises(DimensionMismatch):
        matrix_from_json({"rows": 2, "cols": 2, "data": [[1, 0]]})
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 1, "cols": 1, "data": [[1, 0, 0]]})
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 1})


def test_system_json_round_trip():
    sys = StateSpace([[0.0, 1.0j], [-1.0, -0.5]], [[0.0], [1.0]])
    back = system_from_json(json.loads(json.dumps(system_to_json(sys))))
    np.testing.assert_array_equal(back.A, sys.A)
    np.testing.assert_array_equal(back.B, sys.B)
