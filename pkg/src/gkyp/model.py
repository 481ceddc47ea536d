"""Core domain types: Hermitian matrices, state-space pairs, frequency bands,
certificates and sampled trajectories, plus their JSON representation.

Matrices are plain ``numpy`` arrays (``complex128``). Objects that carry them
are frozen dataclasses whose arrays are marked read-only, so instances can be
shared freely between threads.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidBand, NotHermitian, UncontrollableWarning

HERMITIAN_RTOL = 1e-12
RANK_RTOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D complex array."""
    a = np.atleast_2d(np.asarray(M, dtype=complex))
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def symmetrize(M):
    """Hermitian part ``(M + M^H) / 2``."""
    M = np.asarray(M)
    return 0.5 * (M + np.swapaxes(M, -1, -2).conj())


def hermitian(M, name="matrix", rtol=HERMITIAN_RTOL):
    """Validate that ``M`` is Hermitian and return its exact Hermitian part.

    Raises
    ------
    NotHermitian
        If ``max|M - M^H| > rtol * (1 + max|M|)``.
    """
    a = as_matrix(M, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    scale = 1.0 + (np.abs(a).max() if a.size else 0.0)
    if a.size and np.abs(a - a.conj().T).max() > rtol * scale:
        raise NotHermitian(f"{name} is not Hermitian")
    return _frozen(symmetrize(a))


def eigvalsh(M):
    return np.linalg.eigvalsh(symmetrize(M))


def max_eig(M):
    return float(eigvalsh(M)[-1]) if np.size(M) else 0.0


def min_eig(M):
    return float(eigvalsh(M)[0]) if np.size(M) else 0.0


def realify(H):
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``.

    The spectrum of the result is that of ``H`` with every eigenvalue doubled
    in multiplicity, so definiteness is preserved in both directions.
    """
    H = np.asarray(H)
    re, im = H.real, H.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def hermitian_basis(n, real=False):
    """Basis of ``n x n`` Hermitian (or real symmetric) matrices.

    Ordering is row-major over the upper triangle: a diagonal entry
    contributes one real parameter, an off-diagonal entry contributes its
    real part followed by its imaginary part (the latter omitted when
    ``real``). Returns an array of shape ``(k, n, n)``.
    """
    mats = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n), dtype=complex)
            if i == j:
                E[i, i] = 1.0
                mats.append(E)
                continue
            E[i, j] = E[j, i] = 1.0
            mats.append(E)
            if not real:
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = 1j
                E[j, i] = -1j
                mats.append(E)
    return np.array(mats).reshape(-1, n, n)


def n_hermitian_params(n, real=False):
    return n * (n + 1) // 2 if real else n * n


def assemble_hermitian(params, n, real=False):
    params = np.asarray(params, dtype=float)
    basis = hermitian_basis(n, real)
    if params.shape != (basis.shape[0],):
        raise DimensionMismatch(f"expected {basis.shape[0]} parameters, got {params.shape}")
    return np.tensordot(params, basis, axes=1)


@dataclass(frozen=True)
class StateSpace:
    """The pair ``(A, B)`` of ``x' = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = np.asarray(self.B, dtype=complex)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        B = as_matrix(B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def is_real(self):
        return not (np.any(self.A.imag) or np.any(self.B.imag))

    @property
    def controllable(self):
        return controllability_rank(self) == self.n

    def warn_if_uncontrollable(self):
        r = controllability_rank(self)
        if r < self.n:
            warnings.warn(
                f"(A, B) is not controllable (rank {r} < {self.n}); "
                "FDI/LMI/TDI equivalences are not guaranteed",
                UncontrollableWarning,
                stacklevel=2,
            )
        return r


def controllability_rank(sys):
    """Numerical rank of ``[B, AB, ..., A^(n-1) B]``.

    Singular values below ``1e-9 * sigma_max`` count as zero.
    """
    blocks = [sys.B]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    K = np.hstack(blocks)
    s = np.linalg.svd(K, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


@dataclass(frozen=True)
class FrequencyBand:
    """Closed interval ``{w : (w - w1)(w - w2) <= 0}`` with ``w1 < w2``."""

    w1: float
    w2: float

    def __post_init__(self):
        w1, w2 = float(self.w1), float(self.w2)
        if not (np.isfinite(w1) and np.isfinite(w2)):
            raise InvalidBand("band edges must be finite")
        if not w1 < w2:
            raise InvalidBand(f"band needs w1 < w2 (nonempty interior), got [{w1}, {w2}]")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def center(self):
        return 0.5 * (self.w1 + self.w2)

    @property
    def product(self):
        return self.w1 * self.w2

    @property
    def width(self):
        return self.w2 - self.w1

    @property
    def is_symmetric(self):
        return self.w1 == -self.w2

    def indicator(self, omega):
        """``(w - w1)(w - w2)``; non-positive exactly on the band."""
        omega = np.asarray(omega, dtype=float)
        return (omega - self.w1) * (omega - self.w2)

    def contains(self, omega):
        return self.indicator(omega) <= 0

    def in_interior(self, omega):
        return self.indicator(omega) < 0


@dataclass(frozen=True)
class Certificate:
    """Hermitian pair ``(P, Q)`` for the band LMI, with its recomputed margins.

    ``lmi_margin`` is the largest eigenvalue of the LMI left-hand side and
    ``q_margin`` the smallest eigenvalue of ``Q``.
    """

    P: np.ndarray
    Q: np.ndarray
    lmi_margin: float = float("nan")
    q_margin: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "P", hermitian(self.P, "P", rtol=1e-9))
        object.__setattr__(self, "Q", hermitian(self.Q, "Q", rtol=1e-9))
        if self.P.shape != self.Q.shape:
            raise DimensionMismatch("P and Q must have equal shape")

    def valid(self, tol=1e-6):
        return bool(self.q_margin >= -tol and self.lmi_margin <= tol)


@dataclass(frozen=True)
class Trajectory:
    """Solution samples of ``x' = A x + B u`` on the grid ``t_i = i * dt``.

    ``xdot`` always holds ``A x_i + B u_i`` evaluated from the state
    equation, never a finite difference.
    """

    dt: float
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("x", "u", "xdot"):
            a = np.asarray(getattr(self, name), dtype=complex)
            if a.ndim == 1:
                a = a[:, None]
            object.__setattr__(self, name, _frozen(a))
        if not (self.x.shape[0] == self.u.shape[0] == self.xdot.shape[0]):
            raise DimensionMismatch("x, u, xdot need equal sample counts")
        if self.x.shape != self.xdot.shape:
            raise DimensionMismatch("x and xdot shapes differ")

    @property
    def num_steps(self):
        return self.x.shape[0] - 1

    @property
    def times(self):
        return self.dt * np.arange(self.x.shape[0])

    @property
    def horizon(self):
        return self.dt * self.num_steps

    @property
    def terminal_decay(self):
        norms = np.linalg.norm(self.x, axis=1)
        peak = norms.max()
        return float(norms[-1] / peak) if peak > 0 else 0.0

    @property
    def is_real(self):
        return not (np.any(self.x.imag) or np.any(self.u.imag))


def trapezoid_weights(num_samples, dt):
    w = np.full(num_samples, float(dt))
    if num_samples:
        w[0] *= 0.5
        w[-1] *= 0.5
    if num_samples == 1:
        w[0] = 0.0
    return w


# --- JSON interchange ----------------------------------------------------

def matrix_to_json(M):
    a = np.atleast_2d(np.asarray(M, dtype=complex))
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in a.ravel()],
    }


def matrix_from_json(obj, name="matrix"):
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{name}: expected {{rows, cols, data}}") from exc
    if len(data) != rows * cols:
        raise DimensionMismatch(f"{name}: {len(data)} entries for a {rows}x{cols} matrix")
    vals = []
    for pair in data:
        if isinstance(pair, (int, float)):
            vals.append(complex(pair))
            continue
        if len(pair) != 2:
            raise ValueError(f"{name}: entries must be [re, im] pairs")
        vals.append(complex(float(pair[0]), float(pair[1])))
    return as_matrix(np.array(vals, dtype=complex).reshape(rows, cols), name)


def system_to_json(sys):
    return {"A": matrix_to_json(sys.A), "B": matrix_to_json(sys.B)}


def system_from_json(obj):
    return StateSpace(matrix_from_json(obj["A"], "A"), matrix_from_json(obj["B"], "B"))


def band_to_json(band):
    return {"w1": band.w1, "w2": band.w2}


def band_from_json(obj):
    return FrequencyBand(float(obj["w1"]), float(obj["w2"]))


def pi_from_json(obj):
    return hermitian(matrix_from_json(obj["Pi"], "Pi"), "Pi")


def read_json(path):
    with open(Path(path)) as fh:
        return json.load(fh)


def load_system(path):
    return system_from_json(read_json(path))


def load_pi(path):
    return pi_from_json(read_json(path))


def load_band(path):
    return band_from_json(read_json(path))
