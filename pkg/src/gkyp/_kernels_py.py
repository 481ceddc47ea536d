"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Results agree with the compiled path to rounding; the ordered sums use
``cumsum`` so that leading or trailing zero samples leave the total
bit-for-bit unchanged, as in the compiled loop.
"""
import numpy as np


def propagate(Phi, Gamma, x0, v):
    N, n = v.shape[0], Phi.shape[0]
    out = np.empty((N + 1, n), dtype=complex)
    out[0] = x0
    drive = v @ Gamma.T
    x = out[0]
    for i in range(N):
        x = Phi @ x + drive[i]
        out[i + 1] = x
    return out


def weighted_outer_sum(a, b, w):
    if a.shape[0] == 0:
        return np.zeros((a.shape[1], b.shape[1]), dtype=complex)
    terms = w[:, None, None] * (a[:, :, None] * b.conj()[:, None, :])
    return np.cumsum(terms, axis=0)[-1]


def weighted_quadform_sum(z, M, w):
    if z.shape[0] == 0:
        return 0j
    rows = np.einsum("ir,rc,ic->i", z.conj(), M, z)
    return complex(np.cumsum(w * rows)[-1])
