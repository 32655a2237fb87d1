# cython: language_level=3
"""Compiled edge flux kernel.

Phase one evaluates every edge independently (OpenMP over ``workers``
threads); phase two gathers the edge fluxes into cells serially in edge
order, so the result does not depend on the thread count.  Must stay
operation-for-operation identical to ``_core_py.py``.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()


def edge_fluxes(const cnp.int64_t[::1] left, const cnp.int64_t[::1] right, const cnp.int8_t[::1] kind,
                const double[::1] length, const double[::1] nx, const double[::1] ny,
                const double[::1] vx, const double[::1] vy, const double[::1] th,
                const double[::1] w, const double[::1] c, int viscous, Py_ssize_t n_ext, int workers=1):
    cdef Py_ssize_t ne = left.shape[0]
    cdef Py_ssize_t e, i, j
    cdef double vxm, vym, vn, thi, thj, thup, ths, thmu, cc, p, lm, f

    F_ = np.empty(ne)
    Gx_ = np.empty(ne)
    Gy_ = np.empty(ne)
    Px_ = np.empty(ne)
    Py_ = np.empty(ne)
    Qx_ = np.empty(ne)
    Qy_ = np.empty(ne)
    mu_ = np.empty(ne)
    cdef double[::1] F = F_, Gx = Gx_, Gy = Gy_, Px = Px_, Py = Py_, Qx = Qx_, Qy = Qy_, mu = mu_

    if workers < 1:
        workers = 1

    for e in prange(ne, nogil=True, num_threads=workers, schedule="static"):
        i = left[e]
        j = right[e]
        vxm = 0.5 * (vx[i] + vx[j])
        vym = 0.5 * (vy[i] + vy[j])
        if kind[e] != 2:
            vn = vxm * nx[e] + vym * ny[e]
        else:
            vn = 0.0
        thi = th[i]
        thj = th[j]
        if vn > 0:
            thup = thi
        elif vn < 0:
            thup = thj
        else:
            thup = 0.0
        if vn != 0:
            ths = thup
        elif w[i] > w[j]:
            ths = thi
        else:
            ths = thj

        if kind[e] != 2:
            f = length[e] * thup * vn
            p = -0.5 * length[e] * (w[j] - w[i]) * ths
        else:
            f = 0.0
            p = 0.0
        F[e] = f
        Gx[e] = f * vxm
        Gy[e] = f * vym
        Px[e] = p * nx[e]
        Py[e] = p * ny[e]

        if viscous != 0:
            if viscous == 2:
                thmu = thi if thi <= thj else thj
            elif vn != 0:
                thmu = thup
            else:
                thmu = thi if thi >= thj else thj
            cc = c[i] if c[i] >= c[j] else c[j]
            if kind[e] != 2:
                mu[e] = thmu * cc
            else:
                mu[e] = 0.0
            if kind[e] == 0:
                lm = length[e] * mu[e]
            else:
                lm = 0.0
            Qx[e] = lm * (vx[j] - vx[i])
            Qy[e] = lm * (vy[j] - vy[i])
        else:
            mu[e] = 0.0
            Qx[e] = 0.0
            Qy[e] = 0.0

    L_ = np.zeros(n_ext)
    Jx_ = np.zeros(n_ext)
    Jy_ = np.zeros(n_ext)
    Sx_ = np.zeros(n_ext)
    Sy_ = np.zeros(n_ext)
    Vx_ = np.zeros(n_ext)
    Vy_ = np.zeros(n_ext)
    cdef double[::1] L = L_, Jx = Jx_, Jy = Jy_, Sx = Sx_, Sy = Sy_, Vx = Vx_, Vy = Vy_

    with nogil:
        for e in range(ne):
            i = left[e]
            j = right[e]
            L[i] += -F[e]
            L[j] += F[e]
            Jx[i] += -Gx[e]
            Jx[j] += Gx[e]
            Jy[i] += -Gy[e]
            Jy[j] += Gy[e]
            Sx[i] += Px[e]
            Sx[j] += Px[e]
            Sy[i] += Py[e]
            Sy[j] += Py[e]
            Vx[i] += Qx[e]
            Vx[j] += -Qx[e]
            Vy[i] += Qy[e]
            Vy[j] += -Qy[e]

    return L_, Jx_, Jy_, Sx_, Sy_, Vx_, Vy_, mu_
