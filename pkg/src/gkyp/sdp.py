"""Dense feasibility solver for Hermitian LMIs in real decision variables.

The problem ``Block_k(y) = C_k + sum_i y_i F_ki >= 0`` (all k) is decided via
the phase-I program

    minimize t   subject to   Block_k(y) + t I >= 0,   ||y|| <= R,

solved by a log-barrier path-following method with damped Newton steps.
The sign of the optimal slack ``t_star`` decides strict feasibility.
Complex blocks are realified first so the Newton core runs in real
arithmetic.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .model import hermitian, max_eig, realify, symmetrize

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    STRICTLY_FEASIBLE = "StrictlyFeasible"
    MARGINALLY_FEASIBLE = "MarginallyFeasible"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"

    @property
    def feasible(self):
        return self in (Status.STRICTLY_FEASIBLE, Status.MARGINALLY_FEASIBLE)


@dataclass(frozen=True)
class LmiBlock:
    """Affine Hermitian map ``y -> constant + sum_i y_i coefficients[i]``."""

    constant: np.ndarray
    coefficients: np.ndarray
    name: str = ""

    def __post_init__(self):
        C = hermitian(self.constant, f"block {self.name!r} constant", rtol=1e-10)
        d = C.shape[0]
        F = np.asarray(self.coefficients, dtype=complex)
        if F.size == 0:
            F = np.zeros((0, d, d), dtype=complex)
        if F.ndim != 3 or F.shape[1:] != (d, d):
            raise DimensionMismatch(
                f"block {self.name!r}: coefficients must be (k, {d}, {d}), got {F.shape}"
            )
        if F.size and np.abs(F - np.conj(np.swapaxes(F, 1, 2))).max() > 1e-10 * (1 + np.abs(F).max()):
            raise DimensionMismatch(f"block {self.name!r}: coefficient matrices must be Hermitian")
        F = symmetrize(F)
        F.setflags(write=False)
        object.__setattr__(self, "constant", C)
        object.__setattr__(self, "coefficients", F)

    @property
    def dim(self):
        return self.constant.shape[0]

    @property
    def is_real(self):
        return not (np.any(self.constant.imag) or np.any(self.coefficients.imag))


@dataclass(frozen=True)
class LmiSystem:
    num_vars: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("LMI system needs at least one block")
        for b in blocks:
            if b.coefficients.shape[0] != self.num_vars:
                raise DimensionMismatch(
                    f"block {b.name!r} has {b.coefficients.shape[0]} coefficients, "
                    f"expected {self.num_vars}"
                )
        object.__setattr__(self, "blocks", blocks)


@dataclass
class SdpOutcome:
    status: Status
    y: np.ndarray
    t_star: float
    iterations: int
    gap: float = float("nan")
    ball_active: bool = False
    max_condition: float = 1.0
    message: str = ""
    block_min_eigs: list = field(default_factory=list)

    def to_json(self):
        return {
            "status": self.status.value,
            "t_star": float(self.t_star),
            "iterations": int(self.iterations),
            "gap": float(self.gap),
            "ball_active": bool(self.ball_active),
            "message": self.message,
        }


def eval_block(prob, block_index, y):
    """``constant + sum_i y_i coefficients[i]`` for one block, symmetrized."""
    y = np.asarray(y, dtype=float)
    if y.shape != (prob.num_vars,):
        raise DimensionMismatch(f"y must have length {prob.num_vars}, got {y.shape}")
    b = prob.blocks[block_index]
    return symmetrize(b.constant + np.tensordot(y, b.coefficients, axes=1))


def _realified(prob):
    out = []
    for b in prob.blocks:
        C, F = b.constant, b.coefficients
        if b.is_real:
            out.append((C.real.copy(), F.real.copy()))
        else:
            out.append((realify(C), realify(F)))
    return out


def dump_realified(prob):
    """JSON-ready form of the realified problem, for external cross-checks."""
    return {
        "num_vars": prob.num_vars,
        "blocks": [
            {"constant": C.tolist(), "coefficients": F.tolist()} for C, F in _realified(prob)
        ],
    }


def min_slack(prob, y):
    """Smallest ``t`` with every block ``+ t I`` PSD at ``y``."""
    return max(max_eig(-eval_block(prob, k, y)) for k in range(len(prob.blocks)))


class _Barrier:
    """Barrier pieces for ``z = (y, t)``."""

    def __init__(self, blocks, num_vars, radius):
        self.blocks = blocks
        self.k = num_vars
        self.R2 = radius * radius
        self.degree = sum(C.shape[0] for C, _ in blocks) + (1 if num_vars else 0)

    def mats(self, z):
        y, t = z[:-1], z[-1]
        return [C + np.tensordot(y, F, axes=1) + t * np.eye(C.shape[0]) for C, F in self.blocks]

    def value(self, z):
        """Barrier value, or ``inf`` outside the domain."""
        total = 0.0
        for M in self.mats(z):
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                return np.inf
            total -= 2.0 * np.log(np.diag(L)).sum()
        if self.k:
            slack = self.R2 - z[:-1] @ z[:-1]
            if slack <= 0:
                return np.inf
            total -= np.log(slack)
        return total

    def derivatives(self, z):
        k = self.k
        g = np.zeros(k + 1)
        H = np.zeros((k + 1, k + 1))
        for (C, F), M in zip(self.blocks, self.mats(z)):
            L = np.linalg.cholesky(M)
            Li = np.linalg.inv(L)
            d = C.shape[0]
            G = np.concatenate([F, np.eye(d)[None]], axis=0)
            S = Li @ G @ Li.T
            g -= np.trace(S, axis1=1, axis2=2)
            Sf = S.reshape(k + 1, -1)
            H += Sf @ Sf.T
        if k:
            y = z[:-1]
            slack = self.R2 - y @ y
            g[:-1] += 2.0 * y / slack
            H[:-1, :-1] += 2.0 * np.eye(k) / slack + 4.0 * np.outer(y, y) / slack**2
        return g, H


def _newton_direction(H, g):
    d = np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H / np.outer(d, d)
    w, V = np.linalg.eigh(Hs)
    wmax = w[-1]
    cond = wmax / w[0] if w[0] > 0 else np.inf
    keep = w > 1e-14 * wmax
    rhs = V.T @ (g / d)
    step = -(V[:, keep] @ (rhs[keep] / w[keep])) / d
    return step, cond


def solve_feasibility(
    prob,
    max_iter=400,
    tol=1e-9,
    strict_margin=1e-7,
    radius=1e6,
    mu=10.0,
    debug_path=None,
):
    """Phase-I feasibility for an :class:`LmiSystem`.

    Parameters
    ----------
    prob : LmiSystem
    max_iter : int
        Cap on the total number of Newton steps.
    tol : float
        Target for the barrier duality-gap bound ``degree / s``.
    strict_margin : float
        ``t_star < -strict_margin`` is strictly feasible, ``|t_star| <=
        strict_margin`` marginal.
    radius : float
        Trust-region radius on ``y``. An optimum that runs into it cannot be
        certified unless it is already strictly feasible.

    Returns
    -------
    SdpOutcome
        ``t_star`` is the exact minimal slack attained by the returned ``y``.
    """
    if debug_path is not None:
        with open(debug_path, "w") as fh:
            json.dump(dump_realified(prob), fh)

    blocks = _realified(prob)
    k = prob.num_vars
    bar = _Barrier(blocks, k, radius)
    t0 = max(np.linalg.eigvalsh(-C)[-1] for C, _ in blocks) + 1.0
    z = np.zeros(k + 1)
    z[-1] = t0
    c = np.zeros(k + 1)
    c[-1] = 1.0

    s = 1.0
    iterations = 0
    max_cond = 1.0
    message = ""
    stalled = False
    while True:
        for _ in range(60):
            g, H = bar.derivatives(z)
            g = g + s * c
            step, cond = _newton_direction(H, g)
            max_cond = max(max_cond, cond)
            dec = -(g @ step)
            iterations += 1
            if dec <= 1e-6:
                break
            f0 = s * z[-1] + bar.value(z)
            alpha = 1.0
            while alpha > 1e-14:
                zn = z + alpha * step
                fn = s * zn[-1] + bar.value(zn)
                if fn <= f0 - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                stalled = True
                message = "line search failed"
                break
            z = zn
            # at the roundoff floor further steps only burn iterations
            if f0 - fn <= 1e-12 * max(1.0, abs(f0)):
                break
            if iterations >= max_iter:
                break
        gap = bar.degree / s
        if stalled or iterations >= max_iter or gap < tol:
            break
        s *= mu

    y = z[:-1].copy()
    t_star = min_slack(prob, y)
    gap = bar.degree / s
    ball_active = bool(k and np.linalg.norm(y) > 0.5 * radius)
    converged = gap < tol and not stalled
    if not converged and not message:
        message = "iteration limit reached before gap closure"
    if max_cond > 1e14:
        # informational only: the pseudo-inverse step tolerates it
        message = (message + "; " if message else "") + f"Newton condition {max_cond:.2e}"

    # t_star is attained by y, so it is an upper bound on the optimum;
    # t_star - gap is a lower bound once the path is followed this far
    if t_star < -strict_margin:
        status = Status.STRICTLY_FEASIBLE
    elif ball_active:
        status = Status.NUMERICAL_FAILURE
        message = (message + "; " if message else "") + "trust region active"
    elif t_star - gap > strict_margin:
        status = Status.INFEASIBLE
    elif not converged:
        status = Status.NUMERICAL_FAILURE
    elif abs(t_star) <= strict_margin:
        status = Status.MARGINALLY_FEASIBLE
    else:
        status = Status.INFEASIBLE
    mins = [float(np.linalg.eigvalsh(eval_block(prob, i, y))[0]) for i in range(len(prob.blocks))]
    return SdpOutcome(
        status=status,
        y=y,
        t_star=float(t_star),
        iterations=iterations,
        gap=float(gap),
        ball_active=ball_active,
        max_condition=float(max_cond),
        message=message,
        block_min_eigs=mins,
    )
