# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: state propagation and ordered quadrature sums."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def propagate(const double complex[:, ::1] Phi, const double complex[:, ::1] Gamma,
              const double complex[::1] x0, const double complex[:, ::1] v):
    """x[i+1] = Phi x[i] + Gamma v[i]; returns the (N+1, n) state array."""
    cdef Py_ssize_t N = v.shape[0], n = Phi.shape[0], m = Gamma.shape[1]
    cdef Py_ssize_t i, r, c
    cdef double complex acc
    out = np.empty((N + 1, n), dtype=np.complex128)
    cdef double complex[:, ::1] x = out
    for r in range(n):
        x[0, r] = x0[r]
    for i in range(N):
        for r in range(n):
            acc = 0
            for c in range(n):
                acc = acc + Phi[r, c] * x[i, c]
            for c in range(m):
                acc = acc + Gamma[r, c] * v[i, c]
            x[i + 1, r] = acc
    return out


def weighted_outer_sum(const double complex[:, ::1] a, const double complex[:, ::1] b,
                       const double[::1] w):
    """sum_i w[i] a[i] b[i]^H, accumulated in index order."""
    cdef Py_ssize_t N = a.shape[0], p = a.shape[1], q = b.shape[1]
    cdef Py_ssize_t i, r, c
    out = np.zeros((p, q), dtype=np.complex128)
    cdef double complex[:, ::1] s = out
    cdef double wi
    for i in range(N):
        wi = w[i]
        for r in range(p):
            for c in range(q):
                s[r, c] = s[r, c] + wi * (a[i, r] * b[i, c].conjugate())
    return out


def weighted_quadform_sum(const double complex[:, ::1] z, const double complex[:, ::1] M,
                          const double[::1] w):
    """sum_i w[i] z[i]^H M z[i], accumulated in index order."""
    cdef Py_ssize_t N = z.shape[0], k = z.shape[1]
    cdef Py_ssize_t i, r, c
    cdef double complex total = 0, row
    for i in range(N):
        row = 0
        for r in range(k):
            for c in range(k):
                row = row + z[i, r].conjugate() * M[r, c] * z[i, c]
        total = total + w[i] * row
    return total
