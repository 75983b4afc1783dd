# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


def charpoly(a):
    cdef cplx[:, ::1] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t n = A.shape[0]
    cdef cplx[:, ::1] M = np.zeros((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] W = np.zeros((n, n), dtype=np.complex128)
    out = np.zeros(n + 1, dtype=np.complex128)
    cdef cplx[::1] c = out
    cdef Py_ssize_t i, j, l, k
    cdef cplx acc, tr
    c[0] = 1.0
    for k in range(1, n + 1):
        # W = A @ M + c[k-1] I
        for i in range(n):
            for j in range(n):
                acc = 0
                for l in range(n):
                    acc = acc + A[i, l] * M[l, j]
                W[i, j] = acc
            W[i, i] = W[i, i] + c[k - 1]
        # tr(A @ W)
        tr = 0
        for i in range(n):
            for l in range(n):
                tr = tr + A[i, l] * W[l, i]
        c[k] = -tr / k
        M, W = W, M
    return out


def chain_product(mats):
    cdef cplx[:, :, ::1] S = np.ascontiguousarray(mats, dtype=np.complex128)
    cdef Py_ssize_t K = S.shape[0], n = S.shape[1]
    cdef cplx[:, ::1] P = np.eye(n, dtype=np.complex128)
    cdef cplx[:, ::1] Q = np.empty((n, n), dtype=np.complex128)
    cdef Py_ssize_t s, i, j, l
    cdef cplx acc
    for s in range(K):
        for i in range(n):
            for j in range(n):
                acc = 0
                for l in range(n):
                    acc = acc + S[s, i, l] * P[l, j]
                Q[i, j] = acc
        P, Q = Q, P
    return np.asarray(P).copy()


cdef inline Py_ssize_t _insert_zero(Py_ssize_t x, int bit) nogil:
    # spread x so that position ``bit`` is a zero
    return ((x >> bit) << (bit + 1)) | (x & ((1 << bit) - 1))


def apply_three_qubit(state, u, int q2, int q1, int q0):
    cdef double[::1] psi = np.ascontiguousarray(state, dtype=np.complex128).view(np.float64)
    cdef cplx[:, ::1] U = np.ascontiguousarray(u, dtype=np.complex128)
    out_arr = np.empty(psi.shape[0] // 2, dtype=np.complex128)
    cdef double[::1] out = out_arr.view(np.float64)
    cdef Py_ssize_t dim = psi.shape[0] // 2
    cdef Py_ssize_t m2 = 1 << q2, m1 = 1 << q1, m0 = 1 << q0
    cdef int lo = min(q0, min(q1, q2)), hi = max(q0, max(q1, q2)), mid = q0 + q1 + q2 - lo - hi
    cdef Py_ssize_t j, base, r, col, i
    cdef Py_ssize_t idx[8]
    cdef double ur[64]
    cdef double ui[64]
    cdef double lr[8]
    cdef double li[8]
    cdef double ar, ai
    for r in range(8):
        for col in range(8):
            ur[8 * r + col] = U[r, col].real
            ui[8 * r + col] = U[r, col].imag
    with nogil:
        for j in range(dim >> 3):
            base = _insert_zero(_insert_zero(_insert_zero(j, lo), mid), hi)
            for r in range(8):
                i = base
                if r & 4:
                    i = i | m2
                if r & 2:
                    i = i | m1
                if r & 1:
                    i = i | m0
                idx[r] = i
                lr[r] = psi[2 * i]
                li[r] = psi[2 * i + 1]
            for r in range(8):
                ar = 0.0
                ai = 0.0
                for col in range(8):
                    ar = ar + ur[8 * r + col] * lr[col] - ui[8 * r + col] * li[col]
                    ai = ai + ur[8 * r + col] * li[col] + ui[8 * r + col] * lr[col]
                out[2 * idx[r]] = ar
                out[2 * idx[r] + 1] = ai
    return out_arr


def swap_bits(state, int a, int b):
    cdef cplx[::1] psi = np.ascontiguousarray(state, dtype=np.complex128)
    out_arr = np.empty(psi.shape[0], dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    cdef Py_ssize_t i, d, dim = psi.shape[0]
    for i in range(dim):
        d = ((i >> a) ^ (i >> b)) & 1
        out[i] = psi[i ^ ((d << a) | (d << b))]
    return out_arr
