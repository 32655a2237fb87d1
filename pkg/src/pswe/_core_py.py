"""Pure numpy implementation of the edge flux kernel.

Mirrors ``_core.pyx`` operation for operation so both paths produce
bitwise-identical results; keep them in sync.
"""

import numpy as np


def edge_fluxes(left, right, kind, length, nx, ny, vx, vy, th, w, c, viscous, n_ext, workers=1):
    """Per-edge interface fluxes gathered into per-cell sums.

    Returns ``(L, Jx, Jy, Sx, Sy, Vx, Vy, mu)``: mass rate, advective and
    free-surface momentum rates and the viscous momentum rate per extended
    cell (length ``n_ext``), plus the artificial viscosity per edge.
    ``viscous`` is 0 (off), 1 (upwinded theta*h in mu) or 2 (the smaller
    adjacent theta*h in mu).
    ``workers`` is accepted for signature parity and ignored.
    """
    vxi, vyi = vx[left], vy[left]
    vxj, vyj = vx[right], vy[right]
    thi, thj = th[left], th[right]
    wi, wj = w[left], w[right]
    open_ = kind != 2

    vxm = 0.5 * (vxi + vxj)
    vym = 0.5 * (vyi + vyj)
    vn = np.where(open_, vxm * nx + vym * ny, 0.0)

    thup = np.where(vn > 0, thi, np.where(vn < 0, thj, 0.0))
    ths = np.where(vn != 0, thup, np.where(wi > wj, thi, thj))

    F = np.where(open_, length * thup * vn, 0.0)
    Gx = F * vxm
    Gy = F * vym
    p = np.where(open_, -0.5 * length * (wj - wi) * ths, 0.0)
    Px = p * nx
    Py = p * ny

    if viscous:
        if viscous == 2:
            thmu = np.minimum(thi, thj)
        else:
            thmu = np.where(vn != 0, thup, np.maximum(thi, thj))
        mu = np.where(open_, thmu * np.maximum(c[left], c[right]), 0.0)
        inner = kind == 0
        lm = np.where(inner, length * mu, 0.0)
        Qx = lm * (vxj - vxi)
        Qy = lm * (vyj - vyi)
    else:
        mu = np.zeros_like(length)
        Qx = Qy = np.zeros_like(length)

    # interleave (i, j) per edge so the accumulation order matches the serial loop
    idx = np.column_stack([left, right]).ravel()

    def gather(a, b):
        return np.bincount(idx, weights=np.column_stack([a, b]).ravel(), minlength=n_ext)

    L = gather(-F, F)
    Jx = gather(-Gx, Gx)
    Jy = gather(-Gy, Gy)
    Sx = gather(Px, Px)
    Sy = gather(Py, Py)
    Vx = gather(Qx, -Qx)
    Vy = gather(Qy, -Qy)
    return L, Jx, Jy, Sx, Sy, Vx, Vy, mu
