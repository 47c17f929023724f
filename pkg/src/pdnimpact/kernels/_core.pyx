# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, nonecheck=False
"""Compiled element kernels (OpenMP over elements, then over nodes).

Same array contract as ``_numpy``. Element forces are written to a private
``fe`` slot per element and summed per node in a fixed CSR order, so the
result is bitwise identical for any thread count.
"""

import numpy as np
from cython.parallel cimport prange
from libc.math cimport pow, fabs

ctypedef double f8
ctypedef long long i8


cdef inline void _defgrad_point(const f8* ue, const f8* dN, int nen, f8* F) noexcept nogil:
    cdef int a, i, j
    for i in range(9):
        F[i] = 0.0
    F[0] = 1.0
    F[4] = 1.0
    F[8] = 1.0
    for a in range(nen):
        for i in range(3):
            for j in range(3):
                F[3 * i + j] += ue[3 * a + i] * dN[3 * a + j]


cdef inline void _gather_element(const i8* conn, const f8* u, int nen, f8* ue) noexcept nogil:
    cdef int a, i
    cdef i8 n
    for a in range(nen):
        n = conn[a]
        for i in range(3):
            ue[3 * a + i] = u[3 * n + i]


cdef inline void _scatter_point(const f8* P, const f8* dN, f8 w, int nen, f8* fe) noexcept nogil:
    cdef int a, i, j
    cdef f8 s
    for a in range(nen):
        for i in range(3):
            s = 0.0
            for j in range(3):
                s = s + P[3 * i + j] * dN[3 * a + j]
            fe[3 * a + i] += w * s


cdef inline void _defgrad_element(const f8* dN, const i8* conn, const f8* u, int ng, int nen,
                                  f8* F) noexcept nogil:
    cdef f8 ue[24]
    cdef int q
    _gather_element(conn, u, nen, ue)
    for q in range(ng):
        _defgrad_point(ue, dN + 3 * nen * q, nen, F + 9 * q)


cdef inline void _matmul3(const f8* A, const f8* B, f8* C) noexcept nogil:
    cdef int i, j, k
    cdef f8 s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s = s + A[3 * i + k] * B[3 * k + j]
            C[3 * i + j] = s


cdef inline f8 _det3(const f8* A) noexcept nogil:
    return (A[0] * (A[4] * A[8] - A[5] * A[7])
            - A[1] * (A[3] * A[8] - A[5] * A[6])
            + A[2] * (A[3] * A[7] - A[4] * A[6]))


cdef inline void _elastic_element(const f8* dN, const f8* w, const i8* conn, const f8* u,
                                  const f8* C, int ng, int nen, int small, f8* fe) noexcept nogil:
    cdef f8 ue[24]
    cdef f8 F[9]
    cdef f8 E[6]
    cdef f8 Sv[6]
    cdef f8 S[9]
    cdef f8 P[9]
    cdef int q, i, j, k
    cdef f8 s
    _gather_element(conn, u, nen, ue)
    for i in range(3 * nen):
        fe[i] = 0.0
    for q in range(ng):
        _defgrad_point(ue, dN + 3 * nen * q, nen, F)
        if small:
            E[0] = F[0] - 1.0
            E[1] = F[4] - 1.0
            E[2] = F[8] - 1.0
            E[3] = F[5] + F[7]
            E[4] = F[2] + F[6]
            E[5] = F[1] + F[3]
        else:
            # Green strain, engineering shear
            E[0] = 0.5 * (F[0] * F[0] + F[3] * F[3] + F[6] * F[6] - 1.0)
            E[1] = 0.5 * (F[1] * F[1] + F[4] * F[4] + F[7] * F[7] - 1.0)
            E[2] = 0.5 * (F[2] * F[2] + F[5] * F[5] + F[8] * F[8] - 1.0)
            E[3] = F[1] * F[2] + F[4] * F[5] + F[7] * F[8]
            E[4] = F[0] * F[2] + F[3] * F[5] + F[6] * F[8]
            E[5] = F[0] * F[1] + F[3] * F[4] + F[6] * F[7]
        for i in range(6):
            s = 0.0
            for j in range(6):
                s = s + C[6 * i + j] * E[j]
            Sv[i] = s
        S[0] = Sv[0]; S[4] = Sv[1]; S[8] = Sv[2]
        S[5] = Sv[3]; S[7] = Sv[3]
        S[2] = Sv[4]; S[6] = Sv[4]
        S[1] = Sv[5]; S[3] = Sv[5]
        if small:
            _scatter_point(S, dN + 3 * nen * q, w[q], nen, fe)
        else:
            _matmul3(F, S, P)
            _scatter_point(P, dN + 3 * nen * q, w[q], nen, fe)


cdef inline int _neo_element(const f8* dN, const f8* w, const i8* conn, const f8* u,
                             f8 mu, f8 kappa, int ng, int nen, f8* fe) noexcept nogil:
    cdef f8 ue[24]
    cdef f8 F[9]
    cdef f8 Cm[9]
    cdef f8 Ci[9]
    cdef f8 S[9]
    cdef f8 P[9]
    cdef int q, i, j, k, bad = 0
    cdef f8 J, detC, I1, a, b
    _gather_element(conn, u, nen, ue)
    for i in range(3 * nen):
        fe[i] = 0.0
    for q in range(ng):
        _defgrad_point(ue, dN + 3 * nen * q, nen, F)
        J = _det3(F)
        if J <= 0.0:
            bad = 1
            J = fabs(J) + 1e-300
        for i in range(3):
            for j in range(3):
                Cm[3 * i + j] = F[i] * F[j] + F[3 + i] * F[3 + j] + F[6 + i] * F[6 + j]
        detC = J * J
        Ci[0] = (Cm[4] * Cm[8] - Cm[5] * Cm[7]) / detC
        Ci[1] = (Cm[2] * Cm[7] - Cm[1] * Cm[8]) / detC
        Ci[2] = (Cm[1] * Cm[5] - Cm[2] * Cm[4]) / detC
        Ci[4] = (Cm[0] * Cm[8] - Cm[2] * Cm[6]) / detC
        Ci[5] = (Cm[2] * Cm[3] - Cm[0] * Cm[5]) / detC
        Ci[8] = (Cm[0] * Cm[4] - Cm[1] * Cm[3]) / detC
        Ci[3] = Ci[1]
        Ci[6] = Ci[2]
        Ci[7] = Ci[5]
        I1 = Cm[0] + Cm[4] + Cm[8]
        a = mu * pow(J, -2.0 / 3.0)
        b = kappa * J * (J - 1.0)
        for i in range(9):
            S[i] = -a * I1 / 3.0 * Ci[i] + b * Ci[i]
        S[0] += a
        S[4] += a
        S[8] += a
        _matmul3(F, S, P)
        _scatter_point(P, dN + 3 * nen * q, w[q], nen, fe)
    return bad


def deformation_gradient(const f8[:, :, :, ::1] dNdX, const i8[:, ::1] conn,
                         const f8[:, ::1] u, int nthreads=1):
    cdef Py_ssize_t ne = dNdX.shape[0], e
    cdef int ng = dNdX.shape[1], nen = dNdX.shape[2], q
    out = np.empty((ne, ng, 3, 3))
    cdef f8[:, :, :, ::1] F = out
    if ne == 0:
        return out
    with nogil:
        for e in prange(ne, schedule="static", num_threads=nthreads):
            _defgrad_element(&dNdX[e, 0, 0, 0], &conn[e, 0], &u[0, 0], ng, nen, &F[e, 0, 0, 0])
    return out


def pk1_forces(const f8[:, :, :, ::1] dNdX, const f8[:, ::1] wdetJ,
               const f8[:, :, :, ::1] P, int nthreads=1):
    cdef Py_ssize_t ne = dNdX.shape[0], e
    cdef int ng = dNdX.shape[1], nen = dNdX.shape[2], q, i
    out = np.zeros((ne, nen, 3))
    cdef f8[:, :, ::1] fe = out
    if ne == 0:
        return out
    with nogil:
        for e in prange(ne, schedule="static", num_threads=nthreads):
            for q in range(ng):
                _scatter_point(&P[e, q, 0, 0], &dNdX[e, q, 0, 0], wdetJ[e, q], nen, &fe[e, 0, 0])
    return out


def gather(const f8[:, :, ::1] fe, const i8[::1] ptr, const i8[::1] idx, Py_ssize_t nnodes,
           int nthreads=1):
    out = np.zeros((nnodes, 3))
    cdef f8[:, ::1] f = out
    cdef const f8* src
    cdef Py_ssize_t n, k
    cdef f8 s0, s1, s2
    if fe.shape[0] == 0:
        return out
    src = &fe[0, 0, 0]
    with nogil:
        for n in prange(nnodes, schedule="static", num_threads=nthreads):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            for k in range(ptr[n], ptr[n + 1]):
                s0 = s0 + src[3 * idx[k]]
                s1 = s1 + src[3 * idx[k] + 1]
                s2 = s2 + src[3 * idx[k] + 2]
            f[n, 0] = s0
            f[n, 1] = s1
            f[n, 2] = s2
    return out


def elastic_forces(const f8[:, :, :, ::1] dNdX, const f8[:, ::1] wdetJ, const i8[:, ::1] conn,
                   const f8[:, ::1] u, const f8[:, :, ::1] C, bint small_strain=False,
                   int nthreads=1):
    cdef Py_ssize_t ne = dNdX.shape[0], e, ce
    cdef int ng = dNdX.shape[1], nen = dNdX.shape[2]
    cdef int small = 1 if small_strain else 0
    cdef bint shared = C.shape[0] == 1
    out = np.empty((ne, nen, 3))
    cdef f8[:, :, ::1] fe = out
    if ne == 0:
        return out
    with nogil:
        for e in prange(ne, schedule="static", num_threads=nthreads):
            ce = 0 if shared else e
            _elastic_element(&dNdX[e, 0, 0, 0], &wdetJ[e, 0], &conn[e, 0], &u[0, 0],
                             &C[ce, 0, 0], ng, nen, small, &fe[e, 0, 0])
    return out


def neohookean_forces(const f8[:, :, :, ::1] dNdX, const f8[:, ::1] wdetJ, const i8[:, ::1] conn,
                      const f8[:, ::1] u, const f8[::1] mu, const f8[::1] kappa, int nthreads=1):
    cdef Py_ssize_t ne = dNdX.shape[0], e
    cdef int ng = dNdX.shape[1], nen = dNdX.shape[2]
    out = np.empty((ne, nen, 3))
    flags = np.zeros(ne, dtype=np.int32)
    cdef f8[:, :, ::1] fe = out
    cdef int[::1] fl = flags
    if ne == 0:
        return out, -1
    with nogil:
        for e in prange(ne, schedule="static", num_threads=nthreads):
            fl[e] = _neo_element(&dNdX[e, 0, 0, 0], &wdetJ[e, 0], &conn[e, 0], &u[0, 0],
                                 mu[e], kappa[e], ng, nen, &fe[e, 0, 0])
    bad = np.nonzero(flags)[0]
    return out, (int(bad[0]) if len(bad) else -1)
