"""Time-domain side: trajectories of ``x' = A x + B u`` with ``x(0) = 0``, the
dissipation integral, the band IQC, and constructions that either violate
or respect constrained dissipativity.

Integrals over ``[0, inf)`` are truncated at the end of the sample grid and
computed by the trapezoid rule. Derivatives are always taken from the state
equation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import DimensionMismatch, HorizonExhausted, SingularShift, StepTooLarge
from .freq import fdi_value
from .model import (
    FrequencyBand,
    Trajectory,
    eigvalsh,
    max_eig,
    symmetrize,
    trapezoid_weights,
)

log = logging.getLogger(__name__)

STEP_GUARD = 0.1


# --- simulation ----------------------------------------------------------

def zoh(A, B, dt):
    """Exact zero-order-hold pair ``(e^{A dt}, int_0^dt e^{A s} ds B)``."""
    n, m = B.shape
    aug = np.zeros((n + m, n + m), dtype=complex)
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = sla.expm(aug * dt)
    return E[:n, :n], E[:n, n:]


def spectral_abscissa(A):
    return float(np.linalg.eigvals(A).real.max()) if A.size else -np.inf


def stabilizing_feedback(sys, decay=0.5):
    """Gain ``F`` with every eigenvalue of ``A + B F`` left of ``-decay``.

    Returns zeros when ``A`` already satisfies this. Uses the Riccati
    equation of the shifted pair ``(A + decay I, B)``.
    """
    n, m = sys.n, sys.m
    A = np.asarray(sys.A)
    if spectral_abscissa(A) < -decay:
        return np.zeros((m, n), dtype=complex)
    As = A + decay * np.eye(n)
    X = sla.solve_continuous_are(As, sys.B, np.eye(n), np.eye(m))
    return -(sys.B.conj().T @ X)


def _as_inputs(u, m):
    u = np.asarray(u, dtype=complex)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != m:
        raise DimensionMismatch(f"input samples must have {m} columns, got {u.shape}")
    return u


def simulate(sys, u, dt, feedback=None):
    """ZOH simulation from ``x(0) = 0``.

    Parameters
    ----------
    u : array_like, shape (N+1, m)
        Input samples; ``u[i]`` is held on ``[t_i, t_{i+1})``. With
        ``feedback`` these are the external samples ``v`` and the applied
        input is ``u_i = F x_i + v_i``.
    dt : float
        Step; must satisfy ``dt * ||A|| <= 0.1``.

    Raises
    ------
    StepTooLarge
    """
    if dt <= 0:
        raise StepTooLarge("dt must be positive")
    v = _as_inputs(u, sys.m)
    A = np.asarray(sys.A)
    if feedback is not None:
        feedback = np.asarray(feedback, dtype=complex)
        A = A + sys.B @ feedback
    for M in {id(sys.A): sys.A, id(A): A}.values():
        if dt * np.linalg.norm(M, 2) > STEP_GUARD:
            raise StepTooLarge(f"dt*||A|| = {dt * np.linalg.norm(M, 2):.3g} exceeds {STEP_GUARD}")
    Phi, Gamma = zoh(A, sys.B, dt)
    x = kernels.propagate(Phi, Gamma, np.zeros(sys.n), v[:-1])
    uu = v if feedback is None else v + x @ feedback.T
    return _trajectory(sys, dt, x, uu)


def _trajectory(sys, dt, x, u, meta=None):
    xdot = x @ sys.A.T + u @ sys.B.T
    return Trajectory(dt, x, u, xdot, meta or {})


def raised_cosine_tones(omegas, amps, T):
    """Exponential decomposition of ``sum_k amps[k] e^{j w_k t} w(t)`` with the
    raised-cosine window ``w(t) = (1 - cos(2 pi t / T)) / 2`` on ``[0, T]``.

    Returns ``(frequencies, vectors)`` describing ``sum_e vectors[e] e^{j nu_e t}``.
    """
    step = 2.0 * np.pi / T
    nus, vecs = [], []
    for w, a in zip(np.atleast_1d(omegas), np.atleast_2d(amps)):
        for shift, c in ((0.0, 0.5), (step, -0.25), (-step, -0.25)):
            nus.append(w + shift)
            vecs.append(c * np.asarray(a, dtype=complex))
    return np.array(nus), np.array(vecs)


def exponential_response(sys, nus, vecs, T, dt, feedback=None, tail=0.0):
    """Exact samples of the response to ``v(t) = sum_e vecs[e] e^{j nus[e] t}``
    on ``[0, T]`` (zero afterwards), from ``x(0) = 0``.

    With ``feedback`` the applied input is ``u = F x + v``. ``T`` must be an
    integer multiple of ``dt``; the grid continues for ``tail`` time units.
    """
    n = sys.n
    F = np.zeros((sys.m, n), dtype=complex) if feedback is None else np.asarray(feedback, dtype=complex)
    Ac = sys.A + sys.B @ F
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a multiple of dt")
    Ntail = int(np.ceil(tail / dt))
    t = dt * np.arange(K + 1)
    nus = np.asarray(nus, dtype=float)
    vecs = np.asarray(vecs, dtype=complex).reshape(len(nus), sys.m)
    X = np.stack([np.linalg.solve(1j * nu * np.eye(n) - Ac, sys.B @ b) for nu, b in zip(nus, vecs)])
    phase = np.exp(1j * np.outer(t, nus))
    xp = phase @ X
    vp = phase @ vecs
    Phi = sla.expm(Ac * dt)
    none = np.zeros((n, 1))
    h = kernels.propagate(Phi, none, -xp[0], np.zeros((K, 1)))
    x_win = xp + h
    if Ntail:
        x_tail = kernels.propagate(Phi, none, x_win[-1], np.zeros((Ntail, 1)))[1:]
        x = np.vstack([x_win, x_tail])
        v = np.vstack([vp, np.zeros((Ntail, sys.m))])
    else:
        x, v = x_win, vp
    u = v + x @ F.T
    return _trajectory(sys, dt, x, u, {"T": T, "tail": Ntail * dt})


# --- functionals ---------------------------------------------------------

def tdi_value(traj, Pi):
    """Trapezoid value of ``int [x; u]^H Pi [x; u] dt``."""
    Pi = np.asarray(Pi, dtype=complex)
    z = np.hstack([traj.x, traj.u])
    if Pi.shape != (z.shape[1], z.shape[1]):
        raise DimensionMismatch(f"Pi must be {(z.shape[1],) * 2}, got {Pi.shape}")
    w = trapezoid_weights(z.shape[0], traj.dt)
    val = kernels.weighted_quadform_sum(z, Pi, w)
    scale = np.linalg.norm(Pi, 2) * float(w @ np.sum(np.abs(z) ** 2, axis=1))
    if abs(val.imag) > 1e-9 * scale + 1e-300:
        raise ValueError(f"dissipation integral has imaginary part {val.imag:.3e}; Pi not Hermitian?")
    return float(val.real)


def iqc_value(traj, band):
    """``He int (w1 x + j x')(w2 x + j x')^H dt`` as an n x n Hermitian matrix."""
    a = band.w1 * traj.x + 1j * traj.xdot
    b = band.w2 * traj.x + 1j * traj.xdot
    w = trapezoid_weights(a.shape[0], traj.dt)
    return symmetrize(kernels.weighted_outer_sum(a, b, w))


def gram(a, dt):
    return symmetrize(kernels.weighted_outer_sum(a, a, trapezoid_weights(a.shape[0], dt)))


def slowness_check(traj, varpi, tol=1e-9):
    """Compare ``int x' x'^T`` against ``varpi^2 int x x^T``."""
    if not traj.is_real:
        raise ValueError("slowness check expects a real trajectory")
    lhs = gram(traj.xdot, traj.dt).real
    rhs = gram(traj.x, traj.dt).real
    gap = max_eig(lhs - varpi**2 * rhs)
    return {"lhs": lhs, "rhs": rhs, "max_eig": gap, "satisfied": bool(gap <= tol)}


@dataclass
class TdiResult:
    j_pi: float
    iqc_matrix: np.ndarray
    iqc_max_eig: float
    constraint_satisfied: bool
    terminal_decay: float
    epsilon: float = 0.0
    details: dict = field(default_factory=dict)
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def violates_tdi(self):
        return bool(self.constraint_satisfied and self.j_pi > 0)

    def to_json(self):
        from .model import matrix_to_json

        return {
            "j_pi": float(self.j_pi),
            "iqc_matrix": matrix_to_json(self.iqc_matrix),
            "iqc_max_eig": float(self.iqc_max_eig),
            "constraint_satisfied": bool(self.constraint_satisfied),
            "terminal_decay": float(self.terminal_decay),
            "epsilon": float(self.epsilon),
            "details": {k: v for k, v in self.details.items() if isinstance(v, (int, float, str, bool))},
        }


def iqc_energy(traj, band):
    """``int ||x'||^2 + max(|w1|, |w2|)^2 ||x||^2 dt``: scale for IQC slack."""
    wm = max(abs(band.w1), abs(band.w2))
    w = trapezoid_weights(traj.x.shape[0], traj.dt)
    s = np.sum(np.abs(traj.xdot) ** 2, axis=1) + wm**2 * np.sum(np.abs(traj.x) ** 2, axis=1)
    return float(w @ s)


def evaluate(traj, Pi, band, tol=0.0):
    """Dissipation integral and IQC for one trajectory."""
    Q = iqc_value(traj, band)
    lam = max_eig(Q)
    return TdiResult(
        j_pi=tdi_value(traj, Pi),
        iqc_matrix=Q,
        iqc_max_eig=lam,
        constraint_satisfied=bool(lam <= tol),
        terminal_decay=traj.terminal_decay,
        epsilon=tol,
        trajectory=traj,
    )


# --- falsification -------------------------------------------------------

@dataclass(frozen=True)
class HorizonOptions:
    T0: float = 20.0
    T_cap: float = 2560.0
    decay: float = 0.5
    tail_tol: float = 1e-4
    steps_per_unit: float = 10.0
    max_decay: float = 0.1

    def __post_init__(self):
        if not 0 < self.T0:
            raise ValueError("T0 must be positive")
        if self.steps_per_unit <= 0 or self.decay <= 0:
            raise ValueError("steps_per_unit and decay must be positive")


def _grid_step(A_norm, freq_scale, T, per_unit):
    h = 1.0 / (per_unit * max(A_norm, freq_scale, 1.0))
    K = int(np.ceil(T / h))
    return T / K


def _rate_scale(*mats):
    # sampled signals are sums of modes, so eigenvalues (not norms, which
    # non-normal high-gain loops inflate) set the resolution needed
    return max((np.abs(np.linalg.eigvals(M)).max() for M in mats if M.size), default=0.0)


def _tail_length(Ac, tol):
    rate = -spectral_abscissa(Ac)
    return float(np.log(1.0 / tol) / rate) if rate > 0 else 0.0


def _lam_max(sys, Pi, w):
    from .errors import SingularFrequency

    try:
        return max_eig(fdi_value(sys, Pi, w))
    except SingularFrequency:
        return -np.inf


def pick_violation_frequency(sys, Pi, band, fdi_report):
    """Interior frequency with ``lambda_max(sigma) > 0``, trading the size of
    the violation against distance from the band edges."""
    half = 0.5 * band.width

    def score(w):
        g = max(-band.indicator(w), 0.0) / half**2
        return _lam_max(sys, Pi, w) * g

    pts = [w for w, l in fdi_report.samples if l > 0 and band.in_interior(w)]
    if not pts:
        pts = [band.w1 + 1e-3 * band.width, band.w2 - 1e-3 * band.width]
    best = max(pts, key=score)
    grid = sorted(w for w, _ in fdi_report.samples)
    i = int(np.searchsorted(grid, best))
    lo = grid[i - 1] if i > 0 else band.w1
    hi = grid[i + 1] if i + 1 < len(grid) else band.w2
    lo, hi = max(lo, band.w1), min(hi, band.w2)
    if hi > lo:
        res = minimize_scalar(lambda w: -score(w), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, abs(best))})
        if -res.fun > score(best):
            best = float(res.x)
    return float(best)


def falsify_tdi(sys, Pi, band, fdi_report, opts=None):
    """Build an input in the constraint set whose dissipation integral is positive.

    The input is a raised-cosine-windowed tone at an interior frequency where
    the FDI fails, along the top eigenvector of ``sigma``. For ``A`` that is
    unstable (or slowly decaying) a stabilizing state feedback keeps the
    trajectory square integrable while the steady-state input stays equal
    to the tone. The window length is doubled until the IQC holds up to the
    slack ``epsilon(T) = E / T^2`` and the dissipation integral is positive.

    Raises
    ------
    ValueError
        If the report does not show an FDI violation above ``1e-4``.
    HorizonExhausted
        If ``T_cap`` is exceeded.
    """
    opts = opts or HorizonOptions()
    if fdi_report.holds or fdi_report.worst_eig <= 1e-4:
        raise ValueError("falsify_tdi needs an FDI violation with worst_eig > 1e-4")
    Pi = np.asarray(Pi, dtype=complex)
    omega = pick_violation_frequency(sys, Pi, band, fdi_report)
    lam, V = np.linalg.eigh(fdi_value(sys, Pi, omega))
    u0 = V[:, -1]
    x0 = np.linalg.solve(1j * omega * np.eye(sys.n) - sys.A, sys.B @ u0)
    F = stabilizing_feedback(sys, opts.decay)
    Ac = sys.A + sys.B @ F
    v0 = u0 - F @ x0
    tail = _tail_length(Ac, opts.tail_tol)
    a_norm = _rate_scale(sys.A, Ac)

    T = opts.T0
    last = None
    while T <= opts.T_cap:
        dt = _grid_step(a_norm, abs(omega) + 2 * np.pi / T + max(abs(band.w1), abs(band.w2)),
                        T, opts.steps_per_unit)
        nus, vecs = raised_cosine_tones([omega], [v0], T)
        traj = exponential_response(sys, nus, vecs, T, dt, feedback=F, tail=tail)
        eps = iqc_energy(traj, band) / T**2
        res = evaluate(traj, Pi, band, tol=eps)
        res.details.update(omega=omega, sigma_max=float(lam[-1]), T=T, dt=dt,
                           feedback=bool(np.any(F)))
        last = res
        if res.constraint_satisfied and res.j_pi > 0 and res.terminal_decay <= opts.max_decay:
            return res
        log.info("T=%g: iqc_max=%.3e eps=%.3e j_pi=%.3e decay=%.2e; doubling",
                 T, res.iqc_max_eig, eps, res.j_pi, res.terminal_decay)
        T *= 2
    if last is None:
        raise HorizonExhausted(f"T0={opts.T0} already exceeds T_cap={opts.T_cap}")
    raise HorizonExhausted(
        f"no violating trajectory up to T={opts.T_cap} (last: iqc_max={last.iqc_max_eig:.3e}, "
        f"eps={last.epsilon:.3e}, j_pi={last.j_pi:.3e})"
    )


# --- regularity ----------------------------------------------------------

def exponential_pair(sys, rate, times):
    """``x(t) = -(A + s I)^{-1} B e^{-s t}``, ``u(t) = e^{-s t}`` (each input
    channel), for a scalar rate ``s`` (complex allowed).

    Returns ``(x, u, residual)`` where ``x`` has shape ``(N, n, m)`` and the
    residual is ``max |x' - A x - B u|`` with ``x' = -s x``.
    """
    n = sys.n
    M = sys.A + rate * np.eye(n)
    if np.linalg.svd(M, compute_uv=False)[-1] < 1e-12 * max(np.linalg.norm(sys.A, 2), 1.0):
        raise SingularShift(f"A + ({rate})I is singular")
    X0 = -np.linalg.solve(M, sys.B)
    e = np.exp(-rate * np.asarray(times))
    x = e[:, None, None] * X0
    u = e[:, None, None] * np.eye(sys.m)
    resid = np.abs(-rate * x - sys.A @ x - sys.B @ u).max() if len(e) else 0.0
    return x, u, float(resid)


def regularity_witness(sys, band, mu, decay=None, dt=None, horizon=None, seed=0):
    """Trajectory with ``x(0) = 0`` whose IQC value is negative definite.

    Combines ``n + 1`` slowly decaying oscillations ``e^{(j w_k - alpha) t}``
    at frequencies ``w_k`` spread through the band interior around ``mu``
    (``mu`` is always one of them), each generated by the pair of
    :func:`exponential_pair` with rate ``alpha - j w_k``. The combination
    weights span the null space of the initial states, so ``x(0) = 0``
    without any start-up transient and the trajectory decays at rate
    ``alpha`` for any ``A``. Each mode contributes
    ``(w1 - w_k)(w2 - w_k) / (2 alpha)`` times its direction to the IQC,
    which is negative inside the band and dominates the ``O(1)`` cross
    terms once ``alpha`` is small against the frequency spacing.

    The returned trajectory's ``meta`` holds ``iqc_max_eig`` (negative when
    the witness is interior), ``residual`` and the rates used.

    Raises
    ------
    ValueError
        If ``mu`` is not in the interior of the band.
    SingularShift
        If some ``A + (alpha - j w_k) I`` is singular.
    """
    if not band.in_interior(mu):
        raise ValueError(f"mu={mu} must lie in the interior of the band")
    n, m = sys.n, sys.m
    lo, hi = band.w1 + 0.1 * band.width, band.w2 - 0.1 * band.width
    grid = np.linspace(lo, hi, n + 2)
    others = grid[np.argsort(np.abs(grid - mu))][1:n + 1]
    omegas = np.concatenate([[mu], others])
    spacing = np.min(np.diff(np.sort(omegas)))
    alpha = decay if decay is not None else 0.02 * spacing

    rng = np.random.default_rng(seed)
    dirs = np.eye(m)[np.arange(n + 1) % m] + 0.1 * rng.standard_normal((n + 1, m))
    rates = alpha - 1j * omegas
    X0 = np.stack([exponential_pair(sys, s, [0.0])[0][0] @ d for s, d in zip(rates, dirs)], axis=1)
    # weights with sum_k c_k x_k(0) = 0
    c = np.linalg.svd(X0)[2][-1].conj()

    dt = dt or 0.05 / max(np.abs(omegas).max(), alpha, 1.0)
    horizon = horizon or np.log(1e8) / (2 * alpha)
    N = int(np.ceil(horizon / dt))
    t = dt * np.arange(N + 1)
    x = np.zeros((N + 1, n), dtype=complex)
    u = np.zeros((N + 1, m), dtype=complex)
    resid = 0.0
    for ck, s, d in zip(c, rates, dirs):
        xs, us, r = exponential_pair(sys, s, t)
        resid = max(resid, r)
        x += ck * (xs @ d)
        u += ck * (us @ d)
    x[0] = 0.0
    traj = _trajectory(sys, dt, x, u)
    start = float(np.abs(X0 @ c).max())
    lam = max_eig(iqc_value(traj, band))
    meta = {"iqc_max_eig": lam, "residual": max(resid, start), "alpha": alpha,
            "omegas": omegas.tolist(), "weights": c.tolist(), "interior": bool(lam < 0)}
    return Trajectory(traj.dt, traj.x, traj.u, traj.xdot, meta)


# --- certificate bound ---------------------------------------------------

def dual_pairing(S, M):
    return float(np.real(np.trace(np.asarray(S) @ np.asarray(M))))


def random_constrained_input(sys, band, rng, T, tones=None):
    """Random raised-cosine multi-tone input with every tone inside the band."""
    k = tones or sys.n + 2
    lo, hi = band.w1 + 0.1 * band.width, band.w2 - 0.1 * band.width
    omegas = rng.uniform(lo, hi, size=k)
    amps = (rng.standard_normal((k, sys.m)) + 1j * rng.standard_normal((k, sys.m))) / np.sqrt(2)
    return omegas, amps


def dissipation_bound(traj, Pi, band, cert):
    """Terms of ``j_pi <= <Q, IQC> - x_N^H P x_N + max(lmi_margin, 0) ||z||^2``."""
    j = tdi_value(traj, Pi)
    iqc = iqc_value(traj, band)
    pairing = dual_pairing(cert.Q, iqc)
    xN = traj.x[-1]
    storage = float(np.real(xN.conj() @ cert.P @ xN))
    z = np.hstack([traj.x, traj.u])
    energy = float(trapezoid_weights(z.shape[0], traj.dt) @ np.sum(np.abs(z) ** 2, axis=1))
    slack = max(cert.lmi_margin, 0.0) * energy
    return {
        "j_pi": j,
        "pairing": pairing,
        "storage": storage,
        "slack": slack,
        "excess": j - pairing + storage - slack,
        "iqc_max_eig": max_eig(iqc),
        "iqc_norm": float(np.linalg.norm(iqc, 2)),
        "terminal_decay": traj.terminal_decay,
    }


def check_dissipation_bound(sys, Pi, band, cert, rng, T=None, max_tries=8,
                            decay=0.5, steps_per_unit=4.0, tail_tol=1e-5, iqc_rtol=1e-6):
    """Draw one IQC-satisfying, decayed trajectory and test the certificate bound.

    The trajectory is sampled exactly on three grids (``dt``, ``dt/2``,
    ``dt/4``); a Richardson estimate ``C`` of the trapezoid error sets the
    tolerance ``C dt^2``. A trajectory counts as constrained when
    ``iqc_max_eig <= iqc_rtol * ||IQC||``: window sidelobes leave a
    rounding-level positive part in weakly excited directions.
    """
    Pi = np.asarray(Pi, dtype=complex)
    F = stabilizing_feedback(sys, decay)
    Ac = sys.A + sys.B @ F
    tail = _tail_length(Ac, tail_tol)
    a_norm = _rate_scale(sys.A, Ac)
    T = T or max(40.0, 16 * np.pi / band.width)
    for attempt in range(max_tries):
        omegas, amps = random_constrained_input(sys, band, rng, T)
        nus, vecs = raised_cosine_tones(omegas, amps, T)
        fs = max(abs(band.w1), abs(band.w2)) + 2 * np.pi / T
        dt = _grid_step(a_norm, fs, T, steps_per_unit)
        levels = []
        for r in (1, 2, 4):
            traj = exponential_response(sys, nus, vecs, T, dt / r, feedback=F, tail=tail)
            levels.append(dissipation_bound(traj, Pi, band, cert))
        base = levels[0]
        if base["iqc_max_eig"] > iqc_rtol * base["iqc_norm"] or base["terminal_decay"] > 1e-3:
            if attempt % 2 == 1:
                T *= 2
            continue
        q = [lv["excess"] for lv in levels]
        C = max(abs(q[0] - q[1]) / (0.75 * dt**2), abs(q[1] - q[2]) / (0.75 * (dt / 2) ** 2))
        floor = 1e-12 * (abs(base["j_pi"]) + abs(base["pairing"]) + 1.0)
        tol = C * dt**2 + floor
        return {
            **base,
            "dt": dt,
            "T": T,
            "C": C,
            "tol": tol,
            "ok": bool(base["excess"] <= tol),
            "attempts": attempt + 1,
        }
    return None
