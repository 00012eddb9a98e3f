# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels; same signatures as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _parity(long long v) nogil:
    cdef int p = 0
    while v:
        v &= v - 1
        p ^= 1
    return p


def pauli_expectation(const double complex[::1] amps, const long long[::1] xmasks,
                      const long long[::1] zmasks, const long long[::1] nys,
                      const double[::1] coeffs):
    cdef Py_ssize_t dim = amps.shape[0]
    cdef Py_ssize_t nt = xmasks.shape[0]
    cdef Py_ssize_t k, i
    cdef long long x, z
    cdef double complex acc, total = 0
    cdef double complex ipow[4]
    ipow[0] = 1
    ipow[1] = 1j
    ipow[2] = -1
    ipow[3] = -1j
    with nogil:
        for k in range(nt):
            x = xmasks[k]
            z = zmasks[k]
            acc = 0
            for i in range(dim):
                if _parity(i & z):
                    acc = acc - amps[i ^ x].conjugate() * amps[i]
                else:
                    acc = acc + amps[i ^ x].conjugate() * amps[i]
            total = total + coeffs[k] * ipow[nys[k] % 4] * acc
    return complex(total)


def apply_1q(amps, int n, int q, u):
    cdef const double complex[::1] src = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef const double complex[:, ::1] m = np.ascontiguousarray(u, dtype=np.complex128)
    out = np.empty_like(np.asarray(src))
    cdef double complex[::1] dst = out
    cdef Py_ssize_t dim = src.shape[0]
    cdef long long bit = 1LL << (n - 1 - q)
    cdef Py_ssize_t i, j
    cdef double complex a0, a1
    with nogil:
        for i in range(dim):
            if i & bit:
                continue
            j = i | bit
            a0 = src[i]
            a1 = src[j]
            dst[i] = m[0, 0] * a0 + m[0, 1] * a1
            dst[j] = m[1, 0] * a0 + m[1, 1] * a1
    return out


def apply_2q(amps, int n, int q0, int q1, u):
    cdef const double complex[::1] src = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef const double complex[:, ::1] m = np.ascontiguousarray(u, dtype=np.complex128)
    out = np.empty_like(np.asarray(src))
    cdef double complex[::1] dst = out
    cdef Py_ssize_t dim = src.shape[0]
    cdef long long b0 = 1LL << (n - 1 - q0)
    cdef long long b1 = 1LL << (n - 1 - q1)
    cdef Py_ssize_t i, r, c
    cdef long long idx[4]
    cdef double complex v[4]
    cdef double complex s
    with nogil:
        for i in range(dim):
            if (i & b0) or (i & b1):
                continue
            idx[0] = i
            idx[1] = i | b1
            idx[2] = i | b0
            idx[3] = i | b0 | b1
            for r in range(4):
                v[r] = src[idx[r]]
            for r in range(4):
                s = 0
                for c in range(4):
                    s = s + m[r, c] * v[c]
                dst[idx[r]] = s
    return out
