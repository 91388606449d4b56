# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the Monte Carlo and oracle kernels.

Semantics mirror ``_kernels_py`` exactly; see that module for the contract.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    MAX_ENTANGLED = 0
    TONER_BACON = 1
    SEMIANALYTICAL = 2


cdef inline double sgn(double t) noexcept nogil:
    return 1.0 if t >= 0.0 else -1.0


cdef inline double step(double t) noexcept nogil:
    return 1.0 if t > 0.0 else 0.0


cdef inline double hemisphere(const double* m, double l10, double l11, double l12,
                              double l20, double l21, double l22,
                              const double* p) noexcept nogil:
    cdef double u = p[0], v = p[1], w = p[2], x = p[3], y = p[4]
    cdef double lam0 = u * l10 + l20
    cdef double lam1 = u * l11 + l21
    cdef double lam2 = u * l12 + l22 + v
    return sgn((m[0] * lam0 + m[1] * lam1 + m[2] * lam2) + (w + x * l12 + y * l22))


def mc_table_sums(int kind, a, b, const double[:, :] l1, const double[:, :] l2, params=None):
    cdef const double[:] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:] p
    cdef Py_ssize_t n = l1.shape[0], i
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double d1, d2, c, v0, v1, v2, A, B
    cdef double pa1, pa2, pb1, pb2, bc, f, pc, qc
    if kind == SEMIANALYTICAL:
        p = np.ascontiguousarray(params, dtype=np.float64)
    elif kind != MAX_ENTANGLED and kind != TONER_BACON:
        raise ValueError(f"unknown protocol kind {kind}")
    with nogil:
        for i in range(n):
            d1 = av[0] * l1[i, 0] + av[1] * l1[i, 1] + av[2] * l1[i, 2]
            d2 = av[0] * l2[i, 0] + av[1] * l2[i, 1] + av[2] * l2[i, 2]
            if kind == SEMIANALYTICAL:
                pa1 = (1.0 - hemisphere(&av[0], l1[i, 0], l1[i, 1], l1[i, 2], l2[i, 0], l2[i, 1], l2[i, 2], &p[0])) * 0.5
                pa2 = (1.0 + hemisphere(&av[0], l1[i, 0], l1[i, 1], l1[i, 2], l2[i, 0], l2[i, 1], l2[i, 2], &p[5])) * 0.5
                pb1 = (1.0 + hemisphere(&bv[0], l1[i, 0], l1[i, 1], l1[i, 2], l2[i, 0], l2[i, 1], l2[i, 2], &p[10])) * 0.5
                pb2 = (1.0 - hemisphere(&bv[0], l1[i, 0], l1[i, 1], l1[i, 2], l2[i, 0], l2[i, 1], l2[i, 2], &p[15])) * 0.5
                bc = p[20] + p[21] * l2[i, 2] * (1.0 - l1[i, 2])
                f = (step(d1 + bc) * step(d2 + bc)
                     + step(-d1 + bc) * step(-d2 + bc)
                     - step(-d1 - bc) * step(d2 - bc)
                     - step(d1 - bc) * step(-d2 - bc))
                if f < -1.0:
                    f = -1.0
                elif f > 1.0:
                    f = 1.0
                pc = 0.5 * (1.0 - f)
                qc = 1.0 - pc
                s0 += pc * pa1 * pb1 + qc * pa2 * pb2
                s1 += pc * pa1 * (1.0 - pb1) + qc * pa2 * (1.0 - pb2)
                s2 += pc * (1.0 - pa1) * pb1 + qc * (1.0 - pa2) * pb2
                s3 += pc * (1.0 - pa1) * (1.0 - pb1) + qc * (1.0 - pa2) * (1.0 - pb2)
            else:
                c = sgn(d1) * sgn(d2)
                v0 = l1[i, 0] + c * l2[i, 0]
                v1 = l1[i, 1] + c * l2[i, 1]
                v2 = l1[i, 2] + c * l2[i, 2]
                if kind == MAX_ENTANGLED:
                    A = -sgn(av[0] * v0 + av[1] * v1 + av[2] * v2)
                else:
                    A = -sgn(d1)
                B = sgn(bv[0] * v0 + bv[1] * v1 + bv[2] * v2)
                if A > 0:
                    if B > 0:
                        s0 += 1.0
                    else:
                        s1 += 1.0
                else:
                    if B > 0:
                        s2 += 1.0
                    else:
                        s3 += 1.0
    return np.array([s0, s1, s2, s3])


def oracle_row_scores(direction, rows, double tol):
    cdef const double[:, :, :, :] D = np.ascontiguousarray(direction, dtype=np.float64)
    cdef const long long[:, :] R = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t nx = D.shape[0], ny = D.shape[1], na = D.shape[2]
    cdef Py_ssize_t nrows = R.shape[0]
    G_arr = np.empty((nx, nrows))
    A_arr = np.empty((nx, nrows), dtype=np.int64)
    scores_arr = np.empty(na)
    cdef double[:, :] G = G_arr
    cdef long long[:, :] Aidx = A_arr
    cdef double[:] scores = scores_arr
    cdef Py_ssize_t x, r, a, y
    cdef double s, best
    with nogil:
        for x in range(nx):
            for r in range(nrows):
                best = 0.0
                for a in range(na):
                    s = 0.0
                    for y in range(ny):
                        s = s + D[x, y, a, R[r, y]]
                    scores[a] = s
                    if a == 0 or s > best:
                        best = s
                G[x, r] = best
                for a in range(na):
                    if scores[a] >= best - tol:
                        Aidx[x, r] = a
                        break
    return G_arr, A_arr
