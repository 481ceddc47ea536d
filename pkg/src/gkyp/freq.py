"""Pointwise and band-wide evaluation of the frequency-domain inequality

    [ (jwI - A)^-1 B ; I ]^H  Pi  [ (jwI - A)^-1 B ; I ]  <=  0.

The band check is a sampling method (Chebyshev grid plus bracket
refinement), not a certified global optimizer; the LMI route in
:mod:`gkyp.lmi` is the certified counterpart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AllFrequenciesSingular, DimensionMismatch, SingularFrequency
from .model import hermitian, symmetrize

log = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-10
MARGINAL = 1e-6


@dataclass(frozen=True)
class FdiOptions:
    coarse_points: int = 129
    refine_depth: int = 30
    tol: float = 1e-9
    include_modal_frequencies: bool = True

    def __post_init__(self):
        if self.coarse_points < 16:
            raise ValueError("coarse_points must be >= 16")
        if self.refine_depth < 0:
            raise ValueError("refine_depth must be >= 0")


@dataclass
class FdiReport:
    holds: bool
    worst_omega: float
    worst_eig: float
    worst_vec: np.ndarray
    samples: list = field(default_factory=list)
    singular: list = field(default_factory=list)
    tol: float = 1e-9

    @property
    def marginal(self):
        return abs(self.worst_eig) < MARGINAL

    def to_json(self):
        return {
            "holds": bool(self.holds),
            "worst_omega": float(self.worst_omega),
            "worst_eig": float(self.worst_eig),
            "worst_vec": [[float(z.real), float(z.imag)] for z in self.worst_vec],
            "marginal": bool(self.marginal),
            "tol": float(self.tol),
            "num_samples": len(self.samples),
            "singular_frequencies": [float(w) for w in self.singular],
        }


def _singular_threshold(A):
    return SINGULAR_RTOL * max(np.linalg.norm(A, 2) if A.size else 0.0, 1.0)


def transfer_column(sys, omega):
    """``G(jw) = [(jwI - A)^-1 B ; I_m]``, shape ``(n+m, m)``.

    Raises
    ------
    SingularFrequency
        When the smallest singular value of ``jwI - A`` falls below
        ``1e-10 * max(||A||, 1)``.
    """
    n, m = sys.n, sys.m
    M = 1j * omega * np.eye(n) - sys.A
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin < _singular_threshold(sys.A):
        raise SingularFrequency(omega, smin)
    top = np.linalg.solve(M, sys.B)
    return np.vstack([top, np.eye(m)])


def _check_pi(sys, Pi):
    Pi = np.asarray(Pi, dtype=complex)
    if Pi.shape != (sys.n + sys.m, sys.n + sys.m):
        raise DimensionMismatch(f"Pi must be {(sys.n + sys.m,) * 2}, got {Pi.shape}")
    return Pi


def fdi_value(sys, Pi, omega):
    """``sigma(w) = G(jw)^H Pi G(jw)`` (m x m, Hermitian)."""
    Pi = _check_pi(sys, Pi)
    G = transfer_column(sys, omega)
    return symmetrize(G.conj().T @ Pi @ G)


def _sweep(sys, Pi, omegas):
    """Vectorized largest eigenvalue/eigenvector of sigma over ``omegas``.

    Singular frequencies come back as NaN.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    n, m = sys.n, sys.m
    M = 1j * omegas[:, None, None] * np.eye(n) - sys.A
    smin = np.linalg.svd(M, compute_uv=False)[:, -1]
    ok = smin >= _singular_threshold(sys.A)
    lam = np.full(omegas.shape, np.nan)
    vec = np.full((omegas.size, m), np.nan, dtype=complex)
    if np.any(ok):
        top = np.linalg.solve(M[ok], np.broadcast_to(sys.B, (int(ok.sum()), n, m)))
        G = np.concatenate([top, np.broadcast_to(np.eye(m), (top.shape[0], m, m))], axis=1)
        S = symmetrize(np.conj(np.swapaxes(G, 1, 2)) @ Pi @ G)
        w, V = np.linalg.eigh(S)
        lam[ok] = w[:, -1]
        vec[ok] = V[:, :, -1]
    return lam, vec


def chebyshev_grid(band, count):
    k = np.arange(count)
    pts = band.center - 0.5 * band.width * np.cos(np.pi * k / (count - 1))
    pts[0], pts[-1] = band.w1, band.w2
    return pts


class _Sampler:
    def __init__(self, sys, Pi):
        self.sys, self.Pi = sys, Pi
        self.lam = {}
        self.vec = {}

    def eval(self, omegas):
        new = [w for w in np.atleast_1d(omegas) if float(w) not in self.lam]
        if new:
            lam, vec = _sweep(self.sys, self.Pi, new)
            for w, l, v in zip(new, lam, vec):
                self.lam[float(w)] = float(l)
                self.vec[float(w)] = v
        return [self.lam[float(w)] for w in np.atleast_1d(omegas)]

    def value(self, w):
        v = self.lam[float(w)]
        return -np.inf if np.isnan(v) else v


def _refine(sampler, a, mid, b, depth):
    """Halve the bracket around the best point ``depth`` times."""
    for _ in range(depth):
        cand = [mid]
        if mid > a:
            cand.append(0.5 * (a + mid))
        if b > mid:
            cand.append(0.5 * (mid + b))
        sampler.eval(cand)
        best = max(cand, key=lambda w: (sampler.value(w), -w))
        if best == mid:
            a = cand[1] if mid > a else a
            b = cand[-1] if b > mid else b
        elif best < mid:
            a, b = a, mid
        else:
            a, b = mid, b
        mid = best


def fdi_check(sys, Pi, band, opts=None):
    """Sample ``lambda_max(sigma(w))`` over the band and report the worst point.

    Frequencies where ``jwI - A`` is singular are excluded (logged). The
    eigen-frequencies ``Im(lambda(A))`` inside the band are added to the
    coarse grid so that lightly damped resonances are not stepped over.
    """
    opts = opts or FdiOptions()
    Pi = hermitian(_check_pi(sys, Pi), "Pi")
    grid = chebyshev_grid(band, opts.coarse_points)
    if opts.include_modal_frequencies and sys.n:
        modal = np.linalg.eigvals(sys.A).imag
        modal = modal[band.contains(modal)]
        # the exact eigenfrequency is singular when Re(lambda) = 0; bracket it instead
        offs = 1e-6 * max(band.width, 1.0)
        grid = np.concatenate([grid, modal, modal - offs, modal + offs])
        grid = grid[band.contains(grid)]
    grid = np.unique(grid)

    sampler = _Sampler(sys, Pi)
    lam = np.array(sampler.eval(grid))
    finite = ~np.isnan(lam)
    if not np.any(finite):
        raise AllFrequenciesSingular("every grid frequency is singular")
    singular = [float(w) for w in grid[~finite]]
    if singular:
        log.warning("skipping %d singular frequencies: %s", len(singular), singular[:5])

    g, l = grid[finite], lam[finite]
    for i in range(len(g)):
        left = l[i - 1] if i > 0 else -np.inf
        right = l[i + 1] if i + 1 < len(g) else -np.inf
        if l[i] >= left and l[i] >= right:
            a = g[i - 1] if i > 0 else g[i]
            b = g[i + 1] if i + 1 < len(g) else g[i]
            _refine(sampler, a, g[i], b, opts.refine_depth)

    pts = sorted(sampler.lam)
    samples = [(w, sampler.lam[w]) for w in pts if not np.isnan(sampler.lam[w])]
    worst_omega, worst_eig = max(samples, key=lambda s: (s[1], -s[0]))
    return FdiReport(
        holds=bool(worst_eig <= opts.tol),
        worst_omega=float(worst_omega),
        worst_eig=float(worst_eig),
        worst_vec=np.asarray(sampler.vec[worst_omega]),
        samples=samples,
        singular=sorted(set(singular)),
        tol=opts.tol,
    )


def write_samples_csv(report, path):
    with open(path, "w") as fh:
        fh.write("omega,lambda_max\n")
        for w, l in report.samples:
            fh.write(f"{w!r},{l!r}\n")
