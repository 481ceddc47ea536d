"""Conic S-procedure with PSD matrix multipliers.

Statement (A): ``F(z) >= 0`` for every ``z`` with ``G_j(z) >= 0`` (PSD) for
all ``j``. Statement (B): there are ``tau_0 >= 0`` and PSD ``tau_j``, not
all zero, with ``tau_0 F(z) - sum_j <tau_j, G_j(z)> >= 0`` for every ``z``.
(B) with ``tau_0 > 0`` implies (A). This module searches for (B), searches
for counterexamples to (A), and provides the discretized integral forms and
shift checks used to build such problems from signals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, sdp
from .errors import DimensionMismatch, NumericalFailure
from .model import hermitian_basis, symmetrize, trapezoid_weights

KERNEL_RTOL = 1e-10


def dual_pairing(S, M):
    """``Re tr(S M)``; for PSD ``S`` and ``M`` this is nonnegative."""
    S, M = np.asarray(S), np.asarray(M)
    if S.shape != M.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"pairing needs equal square shapes, got {S.shape} and {M.shape}")
    return float(np.real(np.sum(S * M.T)))


def _kernel_adjoint(K):
    # (p, q, i, j) -> conj of (q, p, j, i)
    return np.conj(np.transpose(K, (1, 0, 3, 2)))


@dataclass(frozen=True)
class QuadraticMap:
    """Matrix-valued quadratic map ``M(z)_pq = z^H Phi_pq z``.

    ``kernel`` has shape ``(d, d, N, N)`` with ``Phi_qp = Phi_pq^H``, so that
    ``M(z)`` is Hermitian. With ``field="real"`` the kernel is real and the
    map is meant for real ``z``.
    """

    kernel: np.ndarray
    field: str = "complex"

    def __post_init__(self):
        K = np.asarray(self.kernel)
        if K.ndim == 2:
            K = K[None, None]
        if K.ndim != 4 or K.shape[0] != K.shape[1] or K.shape[2] != K.shape[3]:
            raise DimensionMismatch(f"kernel must have shape (d, d, N, N), got {K.shape}")
        if self.field not in ("real", "complex"):
            raise ValueError(f"unknown field {self.field!r}")
        K = K.astype(complex)
        adj = _kernel_adjoint(K)
        if np.abs(K - adj).max(initial=0.0) > KERNEL_RTOL * (1.0 + np.abs(K).max(initial=0.0)):
            raise DimensionMismatch("kernel violates Phi_qp = Phi_pq^H")
        K = 0.5 * (K + adj)
        if self.field == "real":
            if np.abs(K.imag).max(initial=0.0) > KERNEL_RTOL * (1.0 + np.abs(K).max(initial=0.0)):
                raise DimensionMismatch("real map with a complex kernel")
            K = K.real.astype(complex)
        K.setflags(write=False)
        object.__setattr__(self, "kernel", K)

    @classmethod
    def scalar(cls, Phi, field=None):
        """Classical form ``z^H Phi z`` (output dimension 1)."""
        Phi = np.asarray(Phi)
        if field is None:
            field = "complex" if np.iscomplexobj(Phi) and np.any(Phi.imag) else "real"
        return cls(Phi[None, None], field)

    @property
    def input_dim(self):
        return self.kernel.shape[2]

    @property
    def output_dim(self):
        return self.kernel.shape[0]

    @property
    def is_real(self):
        return self.field == "real"

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.input_dim,):
            raise DimensionMismatch(f"z must have length {self.input_dim}, got {z.shape}")
        return self.batch(z[None])[0]

    def batch(self, Z):
        """``M(z)`` for each row of ``Z``; shape ``(K, d, d)``."""
        Z = np.asarray(Z, dtype=complex)
        if Z.ndim != 2 or Z.shape[1] != self.input_dim:
            raise DimensionMismatch(f"Z must be (K, {self.input_dim}), got {Z.shape}")
        M = np.einsum("ki,pqij,kj->kpq", Z.conj(), self.kernel, Z, optimize=True)
        return symmetrize(M)

    def scalar_kernel(self):
        if self.output_dim != 1:
            raise DimensionMismatch("map is not scalar-valued")
        return self.kernel[0, 0]

    def pair(self, tau):
        """Kernel of ``z -> <tau, M(z)>``: ``sum_pq tau_qp Phi_pq``."""
        tau = np.asarray(tau)
        if tau.shape != (self.output_dim, self.output_dim):
            raise DimensionMismatch(f"tau must be {(self.output_dim,) * 2}, got {tau.shape}")
        return symmetrize(np.einsum("qp,pqij->ij", tau, self.kernel))

    def restrict(self, basis):
        """The map ``c -> M(basis @ c)`` on a subspace."""
        V = np.asarray(basis, dtype=complex)
        if V.ndim != 2 or V.shape[0] != self.input_dim:
            raise DimensionMismatch(f"basis must have {self.input_dim} rows, got {V.shape}")
        K = np.einsum("ia,pqij,jb->pqab", V.conj(), self.kernel, V, optimize=True)
        field = self.field if not np.any(V.imag) else "complex"
        return QuadraticMap(K, field)


@dataclass(frozen=True)
class SprocCertificate:
    """Multipliers of statement (B)."""

    tau0: float
    taus: tuple
    margin: float = float("nan")
    outcome: object = None

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(np.asarray(t) for t in self.taus))

    def valid(self, tol=1e-9):
        if self.tau0 < -tol:
            return False
        return all(np.linalg.eigvalsh(t)[0] >= -tol for t in self.taus)

    def to_json(self):
        from .model import matrix_to_json

        return {
            "tau0": float(self.tau0),
            "taus": [matrix_to_json(t) for t in self.taus],
            "margin": float(self.margin),
        }


def _check_maps(F, constraints):
    if F.output_dim != 1:
        raise DimensionMismatch("objective map must be scalar-valued")
    for G in constraints:
        if G.input_dim != F.input_dim:
            raise DimensionMismatch(
                f"constraint input dimension {G.input_dim} differs from {F.input_dim}"
            )


def certificate_kernel(F, constraints, tau0, taus):
    """Kernel of ``tau0 F(z) - sum_j <tau_j, G_j(z)>``."""
    K = tau0 * F.scalar_kernel()
    for G, t in zip(constraints, taus):
        K = K - G.pair(t)
    return symmetrize(K)


def find_certificate(F, constraints, regular=True, **solver_kw):
    """Search for statement-(B) multipliers.

    Parameters
    ----------
    F : QuadraticMap
        Scalar-valued objective form.
    constraints : list of QuadraticMap
        Constraint maps ``G_j``; the cone of each is the PSD cone.
    regular : bool
        With ``True`` the multiplier ``tau0`` is fixed to 1. Otherwise
        ``tau0`` is free and the cortege is normalized by
        ``tau0 + sum_j tr(tau_j) = 1``.
    **solver_kw
        Passed to :func:`gkyp.sdp.solve_feasibility`.

    Returns
    -------
    SprocCertificate or None
        ``None`` when the search is infeasible.

    Raises
    ------
    NumericalFailure
        When the solver cannot decide.
    """
    constraints = list(constraints)
    _check_maps(F, constraints)
    real = F.is_real and all(G.is_real for G in constraints)
    bases = [hermitian_basis(G.output_dim, real) for G in constraints]
    K0 = F.scalar_kernel()
    N = F.input_dim

    coef = []
    for G, basis in zip(constraints, bases):
        for E in basis:
            c = -G.pair(E)
            if not regular:
                c = c - np.trace(E).real * K0
            coef.append(c)
    coef = np.array(coef).reshape(-1, N, N)
    nv = coef.shape[0]
    blocks = [sdp.LmiBlock(K0, coef, name="kernel")]
    off = 0
    for j, basis in enumerate(bases):
        d = basis.shape[1]
        sel = np.zeros((nv, d, d), dtype=complex)
        sel[off:off + len(basis)] = basis
        blocks.append(sdp.LmiBlock(np.zeros((d, d)), sel, name=f"tau{j + 1}"))
        off += len(basis)
    if not regular:
        tr = np.concatenate([np.trace(b, axis1=1, axis2=2).real for b in bases])
        blocks.append(sdp.LmiBlock(np.ones((1, 1)), -tr.reshape(-1, 1, 1), name="tau0"))
    out = sdp.solve_feasibility(sdp.LmiSystem(nv, tuple(blocks)), **solver_kw)
    if out.status is sdp.Status.NUMERICAL_FAILURE:
        raise NumericalFailure(f"certificate search: {out.message}")
    if not out.status.feasible:
        return None

    taus, off = [], 0
    for basis in bases:
        k = len(basis)
        taus.append(symmetrize(np.tensordot(out.y[off:off + k], basis, axes=1)))
        off += k
    tau0 = 1.0 if regular else 1.0 - sum(np.trace(t).real for t in taus)
    K = certificate_kernel(F, constraints, tau0, taus)
    margin = float(np.linalg.eigvalsh(K)[0])
    if real:
        taus = [t.real for t in taus]
    return SprocCertificate(tau0, taus, margin, out)


@dataclass
class Witness:
    z: np.ndarray
    objective: float
    constraint_min_eigs: list
    evaluations: int
    restart: int

    def to_json(self):
        return {
            "z": [[float(v.real), float(v.imag)] for v in self.z],
            "objective": float(self.objective),
            "constraint_min_eigs": [float(v) for v in self.constraint_min_eigs],
            "evaluations": int(self.evaluations),
            "restart": int(self.restart),
        }


def _random_directions(rng, count, dim, real):
    Z = rng.standard_normal((count, dim))
    if not real:
        Z = Z + 1j * rng.standard_normal((count, dim))
    Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    return Z.astype(complex)


def _values(F, constraints, Z):
    f = np.real(np.einsum("ki,ij,kj->k", Z.conj(), F.scalar_kernel(), Z))
    gmins = [np.linalg.eigvalsh(G.batch(Z))[:, 0] for G in constraints]
    return f, (np.min(gmins, axis=0) if gmins else np.full(len(f), np.inf)), gmins


def falsify_statement_A(F, constraints, budget=10_000, tol=1e-9, restarts=64, seed=0,
                        penalty=100.0, step=0.1):
    """Search for ``z`` with every ``G_j(z) >= -tol I`` and ``F(z) < -tol``.

    Half of the evaluation budget goes to random unit vectors; the rest is
    shared by ``restarts`` runs of projected gradient descent on the unit
    sphere for ``F(z) + penalty * sum_j ||neg(G_j(z))||^2``, started from
    the best random samples. Every iterate is a candidate; the best one
    wins, with ties broken by the earliest restart and iteration.

    Returns
    -------
    Witness or None
        ``None`` means no witness within budget, not a proof of (A).
    """
    constraints = list(constraints)
    _check_maps(F, constraints)
    real = F.is_real and all(G.is_real for G in constraints)
    rng = np.random.default_rng(seed)
    n = F.input_dim
    K0 = F.scalar_kernel()

    def feasible_best(Z, f, gmin, evals, restart):
        ok = (gmin >= -tol) & (f < -tol)
        if not np.any(ok):
            return None
        i = int(np.flatnonzero(ok)[np.argmin(f[ok])])
        _, _, gm = _values(F, constraints, Z[i:i + 1])
        return Witness(Z[i], float(f[i]), [float(g[0]) for g in gm], evals, restart)

    n_random = max(budget // 2, 1)
    Z = _random_directions(rng, n_random, n, real)
    f, gmin, _ = _values(F, constraints, Z)
    hit = feasible_best(Z, f, gmin, n_random, -1)
    if hit is not None:
        return hit
    merit = f + penalty * np.minimum(gmin, 0.0) ** 2
    starts = Z[np.argsort(merit)[:restarts]]
    per_run = max((budget - n_random) // max(len(starts), 1), 1)

    best = None

    def consider(z, fz, gms, evals, r):
        nonlocal best
        if min(gms, default=np.inf) >= -tol and fz < -tol and (best is None or fz < best.objective):
            best = Witness(z.copy(), float(fz), [float(g) for g in gms], evals, r)

    for r, z in enumerate(starts):
        z = z.copy()
        for it in range(per_run):
            grad = K0 @ z
            gms = []
            for G in constraints:
                M = G.evaluate(z)
                w, V = np.linalg.eigh(M)
                gms.append(w[0])
                for lam, v in zip(w, V.T):
                    if lam >= 0:
                        break
                    # d lambda / d conj(z) = (sum_pq conj(v_p) v_q Phi_pq) z
                    Dv = np.einsum("p,q,pqij->ij", v.conj(), v, G.kernel)
                    grad = grad + 2.0 * penalty * lam * (Dv @ z)
            # iterates are checked along the path: the penalty optimum can sit just outside
            consider(z, np.real(np.vdot(z, K0 @ z)), gms, n_random + r * per_run + it + 1, r)
            grad = grad - np.real(np.vdot(z, grad)) * z
            z = z - step * grad
            if real:
                z = z.real.astype(complex)
            z /= np.linalg.norm(z)
        fz, _, gm = _values(F, constraints, z[None])
        consider(z, fz[0], [g[0] for g in gm], n_random + (r + 1) * per_run, r)
    return best


def sphere_points(dim, count, rng=None, real=True):
    """Dense sample of the unit sphere: an angle grid in 2-D, Gaussian otherwise."""
    if real and dim == 2:
        th = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1).astype(complex)
    rng = rng if rng is not None else np.random.default_rng(0)
    return _random_directions(rng, count, dim, real)


def check_statement_A(F, constraints, points, tol=0.0):
    """Evaluate (A) on sample points; returns ``(holds, min F over feasible samples)``."""
    f, gmin, _ = _values(F, constraints, np.asarray(points, dtype=complex))
    feas = gmin >= -tol
    worst = float(f[feas].min()) if np.any(feas) else np.inf
    return bool(worst >= -tol), worst


def integral_quadratic(F1, F2, z, dt):
    """``He int F1 z z^H F2^H dt`` on a uniform grid (trapezoid weights).

    ``He X = (X + X^H) / 2``. ``z`` has shape ``(num_samples, s)``; ``F1``
    and ``F2`` are ``d x s``.
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[:, None]
    F1 = np.atleast_2d(np.asarray(F1, dtype=complex))
    F2 = np.atleast_2d(np.asarray(F2, dtype=complex))
    if F1.shape[1] != z.shape[1] or F2.shape[1] != z.shape[1] or F1.shape[0] != F2.shape[0]:
        raise DimensionMismatch(
            f"F1 {F1.shape}, F2 {F2.shape} incompatible with samples of width {z.shape[1]}"
        )
    w = trapezoid_weights(z.shape[0], dt)
    return symmetrize(kernels.weighted_outer_sum(z @ F1.T, z @ F2.T, w))


def integral_map(F1, F2, num_samples, dt):
    """:class:`QuadraticMap` of :func:`integral_quadratic` on stacked samples."""
    F1 = np.atleast_2d(np.asarray(F1, dtype=complex))
    F2 = np.atleast_2d(np.asarray(F2, dtype=complex))
    d, s = F1.shape
    w = trapezoid_weights(num_samples, dt)
    # Phi_pq = 1/2 (conj(f2_q) f1_p^T + conj(f1_q) f2_p^T) on each sample block
    blk = 0.5 * (np.einsum("qa,pb->pqab", F2.conj(), F1) + np.einsum("qa,pb->pqab", F1.conj(), F2))
    K = np.zeros((d, d, num_samples * s, num_samples * s), dtype=complex)
    for i in range(num_samples):
        K[:, :, i * s:(i + 1) * s, i * s:(i + 1) * s] = w[i] * blk
    real = not (np.any(F1.imag) or np.any(F2.imag))
    return QuadraticMap(K, "real" if real else "complex")


def shift(z, k):
    """Forward shift by ``k`` samples with zero padding: ``(T_k z)_i = z_{i-k}``."""
    z = np.asarray(z)
    pad = np.zeros((k,) + z.shape[1:], dtype=z.dtype)
    return np.concatenate([pad, z])


def _pad(a, length):
    a = np.asarray(a, dtype=complex)
    if a.shape[0] >= length:
        return a
    return np.concatenate([a, np.zeros((length - a.shape[0],) + a.shape[1:], dtype=complex)])


def shift_system_check(F_list, z, shifts, probes, dt, tol=0.0):
    """Numerical check of the shift-system conditions for integral forms.

    Parameters
    ----------
    F_list : list of (F1, F2)
        Factor pairs of :func:`integral_quadratic`.
    z : array, shape (N, s)
        Finite-support signal with ``z[0] = 0``.
    shifts : list of int
        Shift amounts in samples.
    probes : list of arrays
        Fixed signals ``w`` for the inner products of condition (i).
    dt : float
    tol : float
        Allowed ``|F_j(T_k z) - F_j(z)|``; 0 demands bit equality.

    Returns
    -------
    dict
        ``inner`` (per shift, per probe), ``decreasing`` (inner products vanish
        once the shift clears every probe's support), ``zero_initial``
        (condition ii), ``form_error`` (per shift, worst over ``F_list``)
        and ``passed``.
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[:, None]
    if np.any(z[0]):
        raise ValueError("signal must start at zero")
    base = [integral_quadratic(F1, F2, z, dt) for F1, F2 in F_list]
    inner, zero_initial, form_error = [], [], []
    for k in shifts:
        zk = shift(z, k)
        zero_initial.append(bool(not np.any(zk[0])))
        row = []
        for w in probes:
            w = np.asarray(w, dtype=complex)
            if w.ndim == 1:
                w = w[:, None]
            L = max(len(zk), len(w))
            a, b = _pad(zk, L), _pad(w, L)
            wt = trapezoid_weights(L, dt)
            row.append(complex(np.sum(wt * np.sum(a.conj() * b, axis=1))))
        inner.append(row)
        errs = [float(np.abs(integral_quadratic(F1, F2, zk, dt) - b0).max(initial=0.0))
                for (F1, F2), b0 in zip(F_list, base)]
        form_error.append(max(errs, default=0.0))
    inner = np.array(inner).reshape(len(shifts), len(probes))
    support_end = max((len(np.atleast_1d(w)) for w in probes), default=0)
    first = np.flatnonzero(np.any(np.abs(z) > 0, axis=1))
    start = int(first[0]) if first.size else len(z)
    cleared = [k + start >= support_end for k in shifts]
    decreasing = all(np.all(inner[i] == 0) for i, c in enumerate(cleared) if c)
    return {
        "inner": inner,
        "decreasing": bool(decreasing),
        "zero_initial": all(zero_initial),
        "form_error": form_error,
        "passed": bool(decreasing and all(zero_initial) and max(form_error, default=0.0) <= tol),
    }


def trajectory_space_maps(sys, Pi, band, num_steps, dt):
    """Supply and constraint forms on a discretized zero-terminal input space.

    Inputs are held constant on ``[t_i, t_{i+1})``, ``x_0 = 0`` and the
    space is restricted to ``x_N = 0``. Returns ``(F, G, basis)`` with
    ``F(c) = -int z^H Pi z`` and ``G(c) = -He int (w1 x + j x')(w2 x + j x')^H``
    for the complex input ``u = basis @ c``, both by trapezoid sums with
    ``x'_i = A x_i + B u_i``. Statement (A) for this pair reads "the IQC
    holds implies the dissipation integral is nonpositive".
    """
    from .tdomain import zoh

    n, m, N = sys.n, sys.m, num_steps
    Phi, Gam = zoh(sys.A, sys.B, dt)
    # x_i = sum_{l < i} Phi^{i-1-l} Gam u_l  (u_N = 0)
    dim_u = N * m
    X = np.zeros((N + 1, n, dim_u), dtype=complex)
    for i in range(1, N + 1):
        X[i] = Phi @ X[i - 1]
        X[i][:, (i - 1) * m:i * m] += Gam
    U = np.zeros((N + 1, m, dim_u), dtype=complex)
    for i in range(N):
        U[i][:, i * m:(i + 1) * m] = np.eye(m)
    Xd = np.einsum("ab,ibk->iak", sys.A, X) + np.einsum("ab,ibk->iak", sys.B, U)
    # zero-terminal subspace
    _, sv, Vh = np.linalg.svd(X[N])
    rank = int(np.sum(sv > 1e-12 * max(sv.max(initial=0.0), 1.0)))
    basis = Vh[rank:].conj().T
    w = trapezoid_weights(N + 1, dt)

    Z = np.concatenate([X, U], axis=1)
    KF = -np.einsum("i,iak,ab,ibl->kl", w, Z.conj(), Pi, Z, optimize=True)
    a = band.w1 * X + 1j * Xd
    b = band.w2 * X + 1j * Xd
    # G_pq(u) = -1/2 sum_i w_i (a_p conj(b_q) + b_p conj(a_q))
    KG = -0.5 * (np.einsum("i,iqk,ipl->pqkl", w, b.conj(), a, optimize=True)
                 + np.einsum("i,iqk,ipl->pqkl", w, a.conj(), b, optimize=True))
    F = QuadraticMap(symmetrize(KF), "complex").restrict(basis)
    G = QuadraticMap(KG, "complex").restrict(basis)
    return F, G, basis
