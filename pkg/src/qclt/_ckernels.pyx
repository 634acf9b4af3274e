# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sector-wise beam-splitter convolution and Laguerre sums.

Mirrors qclt._pykernels function for function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def diag_convolve(double[::1] p, double[::1] q, double theta, int J,
                  double[::1] wcat, long[::1] offsets):
    """r_j = sum_{k,l} p_k q_l <j, k+l-j|U|k, l>^2 for j <= J.

    wcat/offsets hold the row-major eigenvector matrices of every sector
    N = 0..K+L back to back. Per sector the cosine and sine halves of the
    amplitude block are two dgemm calls; the phase i^(j-k) only picks
    which half feeds row j, and its sign drops out of the square.
    """
    cdef int K = p.shape[0] - 1
    cdef int L = q.shape[0] - 1
    cdef int top = K + L + 1
    out = np.zeros(J + 1)
    cdef double[::1] o = out
    cdef double[::1] ac = np.zeros(top * top)
    cdef double[::1] asn = np.zeros(top * top)
    cdef double[::1] bk = np.zeros(top * top)
    cdef int[::1] kidx = np.zeros(top, dtype=np.intc)
    cdef double[::1] cs_ = np.zeros(top * top)
    cdef double[::1] wk = np.zeros(top)
    cdef const double* W
    cdef int N, n1, k, j, m, kmin, kmax, rj, nk, idx
    cdef double c, sv, a, one = 1.0, zero = 0.0
    cdef char ta = b'T', tb = b'N'
    with nogil:
        for N in range(top):
            n1 = N + 1
            W = &wcat[offsets[N]]
            kmin = N - L if N - L > 0 else 0
            kmax = N if N < K else K
            rj = (N if N < J else J) + 1
            nk = 0
            for k in range(kmin, kmax + 1):
                a = p[k] * q[N - k]
                if a == 0.0:
                    continue
                wk[nk] = a
                for m in range(n1):
                    bk[nk * n1 + m] = W[k * n1 + m]
                kidx[nk] = k
                nk += 1
            if nk == 0:
                continue
            for m in range(n1):
                c = cos(theta * (2 * m - N))
                sv = sin(theta * (2 * m - N))
                for j in range(rj):
                    ac[j * n1 + m] = W[j * n1 + m] * c
                    asn[j * n1 + m] = W[j * n1 + m] * sv
            # row-major C (rj x nk) = A B^T, i.e. column-major C^T = B A^T
            dgemm(&ta, &tb, &nk, &rj, &n1, &one, &bk[0], &n1, &ac[0], &n1, &zero, &cs_[0], &nk)
            for idx in range(nk):
                k = kidx[idx]
                for j in range(rj):
                    if (j - k) & 1 == 0:
                        a = cs_[j * nk + idx]
                        o[j] += wk[idx] * a * a
            dgemm(&ta, &tb, &nk, &rj, &n1, &one, &bk[0], &n1, &asn[0], &n1, &zero, &cs_[0], &nk)
            for idx in range(nk):
                k = kidx[idx]
                for j in range(rj):
                    if (j - k) & 1 == 1:
                        a = cs_[j * nk + idx]
                        o[j] += wk[idx] * a * a
    return out


def laguerre_project(double[::1] u, double[::1] wts, int K):
    """out_j = sum_i wts_i exp(-u_i/2) L_j(u_i) for j <= K."""
    cdef Py_ssize_t n = u.shape[0]
    out = np.zeros(K + 1)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef int j
    cdef double l0, l1, l2, ui, wi
    with nogil:
        for i in range(n):
            ui = u[i]
            wi = wts[i]
            if wi == 0.0:
                continue
            l0 = exp(-0.5 * ui)
            o[0] += wi * l0
            if K == 0:
                continue
            l1 = (1.0 - ui) * l0
            o[1] += wi * l1
            for j in range(1, K):
                l2 = ((2 * j + 1 - ui) * l1 - j * l0) / (j + 1)
                o[j + 1] += wi * l2
                l0 = l1
                l1 = l2
    return out


def laguerre_eval(double[::1] coef, double[::1] u):
    """out_i = sum_k coef_k exp(-u_i/2) L_k(u_i)."""
    cdef Py_ssize_t n = u.shape[0]
    cdef int K = coef.shape[0] - 1
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef int j
    cdef double l0, l1, l2, ui, acc
    with nogil:
        for i in range(n):
            ui = u[i]
            l0 = exp(-0.5 * ui)
            acc = coef[0] * l0
            if K > 0:
                l1 = (1.0 - ui) * l0
                acc += coef[1] * l1
                for j in range(1, K):
                    l2 = ((2 * j + 1 - ui) * l1 - j * l0) / (j + 1)
                    acc += coef[j + 1] * l2
                    l0 = l1
                    l1 = l2
            o[i] = acc
    return out
