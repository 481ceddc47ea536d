"""Band-limited KYP LMI: assembly, feasibility and certificate checking.

For a band ``[w1, w2]`` with centre ``w0`` the LMI in Hermitian ``P`` and
``Q >= 0`` reads

    [A B; I 0]^H [[-Q, P + j w0 Q], [P - j w0 Q, -w1 w2 Q]] [A B; I 0] + Pi <= 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .errors import DimensionMismatch, NotPsd
from .model import (
    Certificate,
    assemble_hermitian,
    hermitian,
    hermitian_basis,
    max_eig,
    min_eig,
    n_hermitian_params,
    symmetrize,
)


@dataclass(frozen=True)
class LmiOptions:
    max_iter: int = 400
    tol: float = 1e-9
    strict_margin: float = 1e-7
    radius: float = 1e6
    verify_tol: float = 1e-6


def real_mode(sys, Pi, band):
    """Real symmetric unknowns suffice when all data are real and ``w0 = 0``."""
    Pi = np.asarray(Pi)
    return bool(sys.is_real and not np.any(Pi.imag) and band.center == 0.0)


def _check(sys, Pi):
    Pi = np.asarray(Pi, dtype=complex)
    if Pi.shape != (sys.n + sys.m, sys.n + sys.m):
        raise DimensionMismatch(f"Pi must be {(sys.n + sys.m,) * 2}, got {Pi.shape}")
    return hermitian(Pi, "Pi")


def _outer_factor(sys):
    n, m = sys.n, sys.m
    return np.block([[sys.A, sys.B], [np.eye(n), np.zeros((n, m))]])


def _congruence(M, P, Q, band):
    mid = np.block(
        [
            [-Q, P + 1j * band.center * Q],
            [P - 1j * band.center * Q, -band.product * Q],
        ]
    )
    return M.conj().T @ mid @ M


def build_gkyp(sys, Pi, band, real=None):
    """Assemble the band LMI as an :class:`~gkyp.sdp.LmiSystem`.

    Variables are the parameters of ``P`` followed by those of ``Q`` (see
    :func:`gkyp.model.hermitian_basis`). Block 0 is ``-(LHS(P, Q) + Pi) >= 0``
    and block 1 is ``Q >= 0``.
    """
    Pi = _check(sys, Pi)
    if real is None:
        real = real_mode(sys, Pi, band)
    n = sys.n
    basis = hermitian_basis(n, real)
    M = _outer_factor(sys)
    zero = np.zeros((n, n))
    coef_p = [-_congruence(M, E, zero, band) for E in basis]
    coef_q = [-_congruence(M, zero, E, band) for E in basis]
    kyp = sdp.LmiBlock(-Pi, np.array(coef_p + coef_q), name="kyp")
    zq = np.zeros((len(basis), n, n))
    qpsd = sdp.LmiBlock(np.zeros((n, n)), np.concatenate([zq, basis]), name="Q")
    return sdp.LmiSystem(2 * len(basis), (kyp, qpsd))


def build_classical(sys, Pi, real=None):
    """Full-frequency KYP LMI: the band LMI with ``Q`` pinned to zero."""
    Pi = _check(sys, Pi)
    if real is None:
        real = bool(sys.is_real and not np.any(Pi.imag))
    basis = hermitian_basis(sys.n, real)
    coef = []
    for E in basis:
        top = np.block([[sys.A.conj().T @ E + E @ sys.A, E @ sys.B],
                        [sys.B.conj().T @ E, np.zeros((sys.m, sys.m))]])
        coef.append(-top)
    return sdp.LmiSystem(len(basis), (sdp.LmiBlock(-Pi, np.array(coef), name="kyp"),))


def split_solution(y, n, real):
    k = n_hermitian_params(n, real)
    P = assemble_hermitian(y[:k], n, real)
    Q = assemble_hermitian(y[k:2 * k], n, real) if len(y) >= 2 * k else np.zeros((n, n))
    return P, Q


def lmi_lhs(sys, Pi, band, P, Q):
    """LMI left-hand side, written out block by block from plain products.

    Deliberately shares no code with :func:`build_gkyp`.
    """
    A, B = sys.A, sys.B
    AH, BH = A.conj().T, B.conj().T
    w0, w12 = band.center, band.product
    Pp = P + 1j * w0 * Q
    Pm = P - 1j * w0 * Q
    xx = -AH @ Q @ A + AH @ Pp + Pm @ A - w12 * Q
    xu = -AH @ Q @ B + Pm @ B
    ux = -BH @ Q @ A + BH @ Pp
    uu = -BH @ Q @ B
    return np.block([[xx, xu], [ux, uu]]) + Pi


def verify_certificate(sys, Pi, band, cert, tol=1e-6):
    """Recompute the margins of ``cert`` from scratch.

    Returns a dict with ``lmi_margin`` (largest eigenvalue of the LMI
    left-hand side), ``q_margin`` (smallest eigenvalue of ``Q``) and
    ``valid``.
    """
    Pi = _check(sys, Pi)
    P, Q = np.asarray(cert.P), np.asarray(cert.Q)
    if P.shape != (sys.n, sys.n) or Q.shape != (sys.n, sys.n):
        raise DimensionMismatch("certificate dimension does not match the system")
    L = lmi_lhs(sys, Pi, band, P, Q)
    lm = max_eig(L)
    qm = min_eig(Q)
    return {"lmi_margin": lm, "q_margin": qm, "valid": bool(lm <= tol and qm >= -tol)}


def _certificate(sys, Pi, band, P, Q):
    P = 0.5 * (P + P.conj().T)
    Q = 0.5 * (Q + Q.conj().T)
    v = verify_certificate(sys, Pi, band, Certificate(P, Q))
    return Certificate(P, Q, v["lmi_margin"], v["q_margin"])


def gkyp_feasible(sys, Pi, band, opts=None):
    """Decide the band LMI; returns ``(SdpOutcome, Certificate | None)``."""
    opts = opts or LmiOptions()
    Pi = _check(sys, Pi)
    real = real_mode(sys, Pi, band)
    prob = build_gkyp(sys, Pi, band, real=real)
    out = sdp.solve_feasibility(
        prob, max_iter=opts.max_iter, tol=opts.tol,
        strict_margin=opts.strict_margin, radius=opts.radius,
    )
    if not out.status.feasible:
        return out, None
    P, Q = split_solution(out.y, sys.n, real)
    return out, _certificate(sys, Pi, band, P, Q)


def classical_kyp(sys, Pi, opts=None):
    """Full-frequency KYP feasibility (``Q = 0``)."""
    opts = opts or LmiOptions()
    Pi = _check(sys, Pi)
    real = bool(sys.is_real and not np.any(Pi.imag))
    prob = build_classical(sys, Pi, real=real)
    out = sdp.solve_feasibility(
        prob, max_iter=opts.max_iter, tol=opts.tol,
        strict_margin=opts.strict_margin, radius=opts.radius,
    )
    if not out.status.feasible:
        return out, None
    P = assemble_hermitian(out.y, sys.n, real)
    n = sys.n
    Q = np.zeros((n, n))
    L = lmi_lhs(sys, Pi, _FULL_LINE, P, Q)
    return out, Certificate(P, Q, max_eig(L), 0.0)


class _FullLine:
    # Q = 0 removes every band term, so centre and product are irrelevant
    center = 0.0
    product = 0.0


_FULL_LINE = _FullLine()


def multiplier_to_certificate(tau, P=None, tol=1e-9, sys=None, Pi=None, band=None, opts=None):
    """Use an S-procedure multiplier ``tau`` as the ``Q`` of a certificate.

    With ``P`` given, margins are recomputed when ``sys``, ``Pi`` and
    ``band`` are supplied (otherwise only ``q_margin`` is filled in). With
    ``P=None`` the band LMI is solved for ``P`` with ``Q = tau`` held fixed;
    the result is ``None`` if that LMI has no solution.
    """
    tau = hermitian(tau, "tau", rtol=1e-9)
    q = min_eig(tau)
    if q < -tol:
        raise NotPsd(f"multiplier has eigenvalue {q:.3e} < -{tol:g}")
    if P is None:
        if sys is None:
            raise ValueError("completing P needs sys, Pi and band")
        Pi = _check(sys, Pi)
        # LHS(P, tau) + Pi = classical LHS(P) + (Pi + band terms of tau)
        shifted = Pi + _congruence(_outer_factor(sys), np.zeros((sys.n, sys.n)), tau, band)
        out, cert = classical_kyp(sys, symmetrize(shifted), opts)
        if cert is None:
            return None
        return _certificate(sys, Pi, band, cert.P, tau)
    if sys is not None:
        return _certificate(sys, Pi, band, np.asarray(P), tau)
    return Certificate(P, tau, float("nan"), q)
