# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels for the stable Neo-Hookean model and assembly.

Mirrors ``_kernels_py``; loops run without the GIL so callers may split
element ranges across threads.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _shape_grads(const double[:, :] dmi, double D[4][3]) noexcept nogil:
    cdef int b, k
    for b in range(3):
        D[0][b] = 0.0
        for k in range(3):
            D[k + 1][b] = dmi[k, b]
            D[0][b] -= dmi[k, b]


cdef inline void _deformation_gradient(const double[:, :] x, const long long[:] t,
                                       double D[4][3], double F[3][3]) noexcept nogil:
    # F[a, b] = sum_v x_v[a] * D[v, b]
    cdef int a, b, v
    for a in range(3):
        for b in range(3):
            F[a][b] = 0.0
            for v in range(4):
                F[a][b] += x[t[v], a] * D[v][b]


cdef inline double _det(double F[3][3]) noexcept nogil:
    return (F[0][0] * (F[1][1] * F[2][2] - F[1][2] * F[2][1])
            - F[0][1] * (F[1][0] * F[2][2] - F[1][2] * F[2][0])
            + F[0][2] * (F[1][0] * F[2][1] - F[1][1] * F[2][0]))


cdef inline double _snh_density(double F[3][3], double mu, double lam) noexcept nogil:
    cdef double ic = 0.0, J, r
    cdef int a, b
    for a in range(3):
        for b in range(3):
            ic += F[a][b] * F[a][b]
    J = _det(F)
    r = J - 1.0 - mu / lam
    return 0.5 * mu * (ic - 3.0) + 0.5 * lam * r * r


def snh_energies(const double[:, :] x, const long long[:, :] tets,
                 const double[:, :, :] dm_inv, const double[:] volume,
                 double mu, double lam):
    cdef Py_ssize_t m = tets.shape[0], e
    out = np.empty(m)
    cdef double[:] o = out
    cdef double D[4][3]
    cdef double F[3][3]
    with nogil:
        for e in range(m):
            _shape_grads(dm_inv[e], D)
            _deformation_gradient(x, tets[e], D, F)
            o[e] = volume[e] * _snh_density(F, mu, lam)
    return out


cdef void _snh_element(const double[:, :] x, const long long[:] t, const double[:, :] dmi,
                       double vol, double mu, double lam,
                       double* value, double[:] g, double[:, :] H) noexcept nogil:
    cdef double D[4][3]
    cdef double F[3][3]
    cdef double cof[3][3]
    cdef double P[3][3]
    cdef double dP[9][9]
    cdef double T[9][12]
    cdef double J, s, acc
    cdef int a, b, c, d, v, w, i, j, e2, f2, sgn

    _shape_grads(dmi, D)
    _deformation_gradient(x, t, D, F)
    J = _det(F)
    value[0] = vol * _snh_density(F, mu, lam)

    # cofactor columns: f1 x f2, f2 x f0, f0 x f1
    for b in range(3):
        i = (b + 1) % 3
        j = (b + 2) % 3
        cof[0][b] = F[1][i] * F[2][j] - F[2][i] * F[1][j]
        cof[1][b] = F[2][i] * F[0][j] - F[0][i] * F[2][j]
        cof[2][b] = F[0][i] * F[1][j] - F[1][i] * F[0][j]

    s = lam * (J - 1.0) - mu
    for a in range(3):
        for b in range(3):
            P[a][b] = mu * F[a][b] + s * cof[a][b]

    for i in range(9):
        for j in range(9):
            dP[i][j] = lam * cof[i // 3][i % 3] * cof[j // 3][j % 3]
        dP[i][i] += mu
    # d2J/dF_ab dF_cd = eps_ace eps_bdf F_ef, nonzero only when a != c and b != d
    for a in range(3):
        for c in range(3):
            if a == c:
                continue
            e2 = 3 - a - c
            for b in range(3):
                for d in range(3):
                    if b == d:
                        continue
                    f2 = 3 - b - d
                    sgn = (1 if (c - a + 3) % 3 == 1 else -1) * (1 if (d - b + 3) % 3 == 1 else -1)
                    dP[3 * a + b][3 * c + d] += s * sgn * F[e2][f2]

    for v in range(4):
        for c in range(3):
            acc = 0.0
            for b in range(3):
                acc += P[c][b] * D[v][b]
            g[3 * v + c] = vol * acc

    # T[(c,b), (w,e)] = sum_d dP[(c,b),(e,d)] D[w,d]
    for i in range(9):
        for w in range(4):
            for e2 in range(3):
                acc = 0.0
                for d in range(3):
                    acc += dP[i][3 * e2 + d] * D[w][d]
                T[i][3 * w + e2] = acc
    for v in range(4):
        for c in range(3):
            for j in range(12):
                acc = 0.0
                for b in range(3):
                    acc += D[v][b] * T[3 * c + b][j]
                H[3 * v + c, j] = vol * acc
    for i in range(12):
        for j in range(i + 1, 12):
            acc = 0.5 * (H[i, j] + H[j, i])
            H[i, j] = acc
            H[j, i] = acc


def snh_quadratics(const double[:, :] x, const long long[:, :] tets,
                   const double[:, :, :] dm_inv, const double[:] volume,
                   double mu, double lam):
    cdef Py_ssize_t m = tets.shape[0], e
    values = np.empty(m)
    grads = np.empty((m, 12))
    hess = np.empty((m, 12, 12))
    cdef double[:] vv = values
    cdef double[:, :] gv = grads
    cdef double[:, :, :] hv = hess
    with nogil:
        for e in range(m):
            _snh_element(x, tets[e], dm_inv[e], volume[e], mu, lam, &vv[e], gv[e], hv[e])
    return values, grads, hess


def scatter_add(slots, values, Py_ssize_t size):
    cdef const long long[:] sl = np.ascontiguousarray(slots, dtype=np.int64).ravel()
    cdef const double[:] va = np.ascontiguousarray(values, dtype=np.float64).ravel()
    out = np.zeros(size)
    cdef double[:] o = out
    cdef Py_ssize_t i, n = sl.shape[0]
    with nogil:
        for i in range(n):
            if sl[i] >= 0:
                o[sl[i]] += va[i]
    return out
