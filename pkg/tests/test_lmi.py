import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gamma_pi, random_psd
from gkyp.errors import DimensionMismatch, NotPsd
from gkyp.freq import fdi_check
from gkyp.harness import draw_spec, generate_instance
from gkyp.lmi import (
    build_gkyp,
    classical_kyp,
    gkyp_feasible,
    lmi_lhs,
    multiplier_to_certificate,
    real_mode,
    split_solution,
    verify_certificate,
)
from gkyp.model import Certificate, FrequencyBand, StateSpace, n_hermitian_params
from gkyp.sdp import Status, eval_block


def outer_factor(sys):
    n, m = sys.n, sys.m
    return np.vstack([np.hstack([sys.A, sys.B]), np.hstack([np.eye(n), np.zeros((n, m))])])


def direct_lhs(sys, Pi, band, P, Q):
    M = outer_factor(sys)
    w0, w12 = band.center, band.product
    mid = np.block([[-Q, P + 1j * w0 * Q], [P - 1j * w0 * Q, -w12 * Q]])
    return M.conj().T @ mid @ M + Pi


def instance(seed, n_max=4):
    spec = draw_spec(seed, n_max=n_max)
    return generate_instance(spec)


# --- assembly -------------------------------------------------------------

def test_unit_p_matches_direct_product(scalar_sys, unit_band):
    Pi = gamma_pi(1.0)
    prob = build_gkyp(scalar_sys, Pi, unit_band)
    M = outer_factor(scalar_sys)
    want = M.conj().T @ np.array([[0.0, 1.0], [1.0, 0.0]]) @ M
    got = -eval_block(prob, 0, [1.0, 0.0]) - Pi
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_zero_certificate_gives_minus_pi(scalar_sys, unit_band):
    Pi = gamma_pi(0.5)
    prob = build_gkyp(scalar_sys, Pi, unit_band)
    np.testing.assert_array_equal(eval_block(prob, 0, np.zeros(prob.num_vars)), -Pi)


def test_symmetric_band_middle_matrix():
    rng = np.random.default_rng(2)
    sys = StateSpace(rng.standard_normal((2, 2)), rng.standard_normal((2, 1)))
    band = FrequencyBand(-1.5, 1.5)
    P, Q = random_psd(rng, 2, cplx=False) - np.eye(2), random_psd(rng, 2, cplx=False)
    M = outer_factor(sys)
    want = M.T @ np.block([[-Q, P], [P, 2.25 * Q]]) @ M
    np.testing.assert_allclose(lmi_lhs(sys, np.zeros((3, 3)), band, P, Q), want, atol=1e-12)


def test_real_mode_selection():
    sys = StateSpace([[-1.0]], [[1.0]])
    assert real_mode(sys, np.eye(2), FrequencyBand(-1, 1))
    assert not real_mode(sys, np.eye(2), FrequencyBand(1, 2))
    assert not real_mode(StateSpace([[-1j]], [[1.0]]), np.eye(2), FrequencyBand(-1, 1))
    prob = build_gkyp(sys, np.eye(2), FrequencyBand(-1, 1))
    assert prob.num_vars == 2 * n_hermitian_params(1, real=True)


def test_dimension_mismatch(scalar_sys, unit_band):
    with pytest.raises(DimensionMismatch):
        build_gkyp(scalar_sys, np.eye(3), unit_band)


@pytest.mark.parametrize("seed", range(200))
def test_assembly_consistency(seed):
    sys, Pi, band = instance(seed)
    real = real_mode(sys, Pi, band)
    prob = build_gkyp(sys, Pi, band, real=real)
    y = np.random.default_rng(seed).standard_normal(prob.num_vars)
    P, Q = split_solution(y, sys.n, real)
    ref = direct_lhs(sys, np.asarray(Pi), band, P, Q)
    np.testing.assert_allclose(eval_block(prob, 0, y), -ref, atol=1e-10 * (1 + np.abs(ref).max()))
    np.testing.assert_allclose(lmi_lhs(sys, Pi, band, P, Q), ref, atol=1e-10 * (1 + np.abs(ref).max()))


# --- feasibility ----------------------------------------------------------

def test_feasible_worked_example(scalar_sys, unit_band):
    out, cert = gkyp_feasible(scalar_sys, gamma_pi(1.0), unit_band)
    assert out.status is Status.STRICTLY_FEASIBLE
    assert cert.valid(1e-9)


def test_infeasible_worked_example(scalar_sys, unit_band):
    out, cert = gkyp_feasible(scalar_sys, gamma_pi(0.5), unit_band)
    assert out.status is Status.INFEASIBLE and cert is None
    assert out.t_star > 1e-4


def test_negative_identity_supply(scalar_sys, unit_band):
    out, cert = gkyp_feasible(scalar_sys, -np.eye(2), unit_band)
    assert out.status is Status.STRICTLY_FEASIBLE
    v = verify_certificate(scalar_sys, -np.eye(2), unit_band, Certificate(np.zeros((1, 1)), np.zeros((1, 1))))
    assert v["valid"]


@pytest.mark.parametrize("seed", range(10))
def test_agrees_with_frequency_sweep(seed):
    sys, Pi, band = instance(seed)
    rep = fdi_check(sys, Pi, band)
    out, cert = gkyp_feasible(sys, Pi, band)
    if abs(rep.worst_eig) <= 1e-4 or out.status is Status.NUMERICAL_FAILURE:
        pytest.skip("marginal or undecided instance")
    assert rep.holds == out.status.feasible
    if cert is not None:
        assert verify_certificate(sys, Pi, band, cert, tol=1e-6)["valid"]


# --- certificate checking -------------------------------------------------

def test_verify_zero_certificate_negative_supply(scalar_sys, unit_band):
    z = np.zeros((1, 1))
    v = verify_certificate(scalar_sys, -np.eye(2), unit_band, Certificate(z, z))
    assert v["lmi_margin"] == pytest.approx(-1.0)
    assert v["q_margin"] == 0.0 and v["valid"]


def test_verify_rejects_indefinite_q(scalar_sys, unit_band):
    v = verify_certificate(scalar_sys, -np.eye(2), unit_band,
                           Certificate(np.zeros((1, 1)), -np.eye(1)))
    assert v["q_margin"] == -1.0 and not v["valid"]


def test_verify_dimension_check(scalar_sys, unit_band):
    with pytest.raises(DimensionMismatch):
        verify_certificate(scalar_sys, -np.eye(2), unit_band, Certificate(np.eye(2), np.eye(2)))


# --- classical KYP --------------------------------------------------------

def test_classical_positive_real_violation(scalar_sys):
    out, cert = classical_kyp(scalar_sys, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not out.status.feasible and cert is None


def test_classical_passive_sign(scalar_sys):
    out, cert = classical_kyp(scalar_sys, np.array([[0.0, -1.0], [-1.0, 0.0]]))
    assert out.status.feasible
    assert cert.lmi_margin <= 1e-6


def test_classical_negative_identity(scalar_sys):
    out, cert = classical_kyp(scalar_sys, -np.eye(2))
    assert out.status is Status.STRICTLY_FEASIBLE
    np.testing.assert_array_equal(cert.Q, 0)


# --- multipliers ----------------------------------------------------------

def test_zero_multiplier_is_classical():
    c = multiplier_to_certificate(np.zeros((2, 2)), np.eye(2))
    np.testing.assert_array_equal(c.Q, np.zeros((2, 2)))


def test_identity_multiplier():
    rng = np.random.default_rng(0)
    P = rng.standard_normal((2, 2))
    c = multiplier_to_certificate(np.eye(2), P + P.T)
    np.testing.assert_array_equal(c.Q, np.eye(2))
    np.testing.assert_array_equal(c.P, P + P.T)


def test_indefinite_multiplier_rejected():
    with pytest.raises(NotPsd):
        multiplier_to_certificate(np.diag([1.0, -1.0]), np.eye(2))


def test_multiplier_with_solved_p_verifies(scalar_sys, unit_band):
    Pi = gamma_pi(1.0)
    out, cert = gkyp_feasible(scalar_sys, Pi, unit_band)
    c = multiplier_to_certificate(cert.Q, cert.P, sys=scalar_sys, Pi=Pi, band=unit_band)
    assert verify_certificate(scalar_sys, Pi, unit_band, c)["valid"]


def test_multiplier_completion(scalar_sys, unit_band):
    Pi = gamma_pi(1.0)
    _, cert = gkyp_feasible(scalar_sys, Pi, unit_band)
    c = multiplier_to_certificate(cert.Q, sys=scalar_sys, Pi=Pi, band=unit_band)
    np.testing.assert_allclose(c.Q, cert.Q)
    assert c.valid(1e-9)
    # gamma = 1 holds on the whole axis, so the classical multiplier also completes
    assert multiplier_to_certificate(np.zeros((1, 1)), sys=scalar_sys, Pi=Pi, band=unit_band) is not None
    # 1/(1+w^2) <= 0.6 on [1, 2] but not at w = 0: the zero multiplier has no completion
    Pi_band = np.diag([1.0, -0.6])
    assert gkyp_feasible(scalar_sys, Pi_band, unit_band)[0].status.feasible
    assert multiplier_to_certificate(np.zeros((1, 1)), sys=scalar_sys, Pi=Pi_band,
                                     band=unit_band) is None


# --- covariance properties -------------------------------------------------

@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_scaling_covariance(seed, alpha):
    sys, Pi, band = instance(seed, n_max=3)
    out, cert = gkyp_feasible(sys, Pi, band)
    if out.status is Status.NUMERICAL_FAILURE or abs(out.t_star) < 1e-4:
        return
    out2, _ = gkyp_feasible(sys, alpha * np.asarray(Pi), band)
    assert out2.status.feasible == out.status.feasible
    if cert is not None:
        scaled = Certificate(alpha * cert.P, alpha * cert.Q)
        assert verify_certificate(sys, alpha * np.asarray(Pi), band, scaled, tol=1e-6 * alpha)["valid"]


def _feasible_instances(count, n_max=3):
    seed = 0
    while count:
        sys, Pi, band = instance(seed, n_max=n_max)
        seed += 1
        if gkyp_feasible(sys, Pi, band)[0].status is Status.STRICTLY_FEASIBLE:
            count -= 1
            yield seed, sys, Pi, band


def test_band_shrinking():
    for seed, sys, Pi, band in _feasible_instances(5):
        rng = np.random.default_rng(seed)
        a, b = np.sort(rng.uniform(band.w1, band.w2, 2))
        sub = FrequencyBand(a, b)
        assert fdi_check(sys, Pi, sub).holds
        assert gkyp_feasible(sys, Pi, sub)[0].status.feasible
