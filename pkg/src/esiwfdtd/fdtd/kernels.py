"""Numba kernels for the Yee leapfrog update with CPML auxiliary fields.

Each kernel writes every output element exactly once from inputs that are
not modified in the same pass, so results do not depend on how ``prange``
partitions the outer loop.

CPML auxiliaries are stored compactly: along a graded axis only the layer
cells are kept, and ``m*`` index maps translate a grid index into that
compact index (-1 outside the layer).  Periodic axes are expressed through
the ``*m``/``*p`` neighbour maps used by the E update.
"""

import warnings

import numpy as np
from numba import njit, prange
from numba.core.errors import NumbaWarning

# an old system TBB only disables that threading layer; numba falls back silently
warnings.filterwarnings("ignore", message=".*TBB threading layer.*", category=NumbaWarning)


@njit(parallel=True, cache=True)
def update_h(Hx, Hy, Hz, Ex, Ey, Ez, ch, idx, idy, idz,
             khx, khy, khz, bhx, bhy, bhz, ahx, ahy, ahz, mhx, mhy, mhz,
             psi_hxy, psi_hxz, psi_hyz, psi_hyx, psi_hzx, psi_hzy):
    nx = Hy.shape[0]
    ny = Hx.shape[1]
    nz = Hx.shape[2]
    # Hx (nx+1, ny, nz)
    for i in prange(nx + 1):
        for j in range(ny):
            my = mhy[j]
            for k in range(nz):
                dy = (Ez[i, j + 1, k] - Ez[i, j, k]) * idy
                dz = (Ey[i, j, k + 1] - Ey[i, j, k]) * idz
                cy = dy * khy[j]
                cz = dz * khz[k]
                if my >= 0:
                    p = bhy[j] * psi_hxy[i, my, k] + ahy[j] * dy
                    psi_hxy[i, my, k] = p
                    cy += p
                mz = mhz[k]
                if mz >= 0:
                    p = bhz[k] * psi_hxz[i, j, mz] + ahz[k] * dz
                    psi_hxz[i, j, mz] = p
                    cz += p
                Hx[i, j, k] -= ch * (cy - cz)
    # Hy (nx, ny+1, nz)
    for i in prange(nx):
        mx = mhx[i]
        for j in range(ny + 1):
            for k in range(nz):
                dz = (Ex[i, j, k + 1] - Ex[i, j, k]) * idz
                dx = (Ez[i + 1, j, k] - Ez[i, j, k]) * idx
                cz = dz * khz[k]
                cx = dx * khx[i]
                mz = mhz[k]
                if mz >= 0:
                    p = bhz[k] * psi_hyz[i, j, mz] + ahz[k] * dz
                    psi_hyz[i, j, mz] = p
                    cz += p
                if mx >= 0:
                    p = bhx[i] * psi_hyx[mx, j, k] + ahx[i] * dx
                    psi_hyx[mx, j, k] = p
                    cx += p
                Hy[i, j, k] -= ch * (cz - cx)
    # Hz (nx, ny, nz+1)
    for i in prange(nx):
        mx = mhx[i]
        for j in range(ny):
            my = mhy[j]
            for k in range(nz + 1):
                dx = (Ey[i + 1, j, k] - Ey[i, j, k]) * idx
                dy = (Ex[i, j + 1, k] - Ex[i, j, k]) * idy
                cx = dx * khx[i]
                cy = dy * khy[j]
                if mx >= 0:
                    p = bhx[i] * psi_hzx[mx, j, k] + ahx[i] * dx
                    psi_hzx[mx, j, k] = p
                    cx += p
                if my >= 0:
                    p = bhy[j] * psi_hzy[i, my, k] + ahy[j] * dy
                    psi_hzy[i, my, k] = p
                    cy += p
                Hz[i, j, k] -= ch * (cx - cy)


@njit(parallel=True, cache=True)
def update_e(Ex, Ey, Ez, Hx, Hy, Hz, cax, cbx, cay, cby, caz, cbz, idx, idy, idz,
             ax_i, ay_i, az_i, xm, xp, ym, yp, zm, zp,
             kex, key, kez, bex, bey, bez, aex, aey, aez, mex, mey, mez,
             psi_exy, psi_exz, psi_eyz, psi_eyx, psi_ezx, psi_ezy):
    """E update on active nodes; ``a?_i`` list the active node indices per axis."""
    nx = Ex.shape[0]
    ny = Ey.shape[1]
    nz = Ez.shape[2]
    nay = ay_i.shape[0]
    naz = az_i.shape[0]
    nax = ax_i.shape[0]
    # Ex (nx, ny+1, nz+1): cells along x, active nodes along y and z
    for i in prange(nx):
        for jj in range(nay):
            j = ay_i[jj]
            my = mey[j]
            for kk in range(naz):
                k = az_i[kk]
                dy = (Hz[i, yp[j], k] - Hz[i, ym[j], k]) * idy
                dz = (Hy[i, j, zp[k]] - Hy[i, j, zm[k]]) * idz
                cy = dy * key[j]
                cz = dz * kez[k]
                if my >= 0:
                    p = bey[j] * psi_exy[i, my, k] + aey[j] * dy
                    psi_exy[i, my, k] = p
                    cy += p
                mz = mez[k]
                if mz >= 0:
                    p = bez[k] * psi_exz[i, j, mz] + aez[k] * dz
                    psi_exz[i, j, mz] = p
                    cz += p
                Ex[i, j, k] = cax[i, j, k] * Ex[i, j, k] + cbx[i, j, k] * (cy - cz)
    # Ey (nx+1, ny, nz+1)
    for ii in prange(nax):
        i = ax_i[ii]
        mx = mex[i]
        for j in range(ny):
            for kk in range(naz):
                k = az_i[kk]
                dz = (Hx[i, j, zp[k]] - Hx[i, j, zm[k]]) * idz
                dx = (Hz[xp[i], j, k] - Hz[xm[i], j, k]) * idx
                cz = dz * kez[k]
                cx = dx * kex[i]
                mz = mez[k]
                if mz >= 0:
                    p = bez[k] * psi_eyz[i, j, mz] + aez[k] * dz
                    psi_eyz[i, j, mz] = p
                    cz += p
                if mx >= 0:
                    p = bex[i] * psi_eyx[mx, j, k] + aex[i] * dx
                    psi_eyx[mx, j, k] = p
                    cx += p
                Ey[i, j, k] = cay[i, j, k] * Ey[i, j, k] + cby[i, j, k] * (cz - cx)
    # Ez (nx+1, ny+1, nz)
    for ii in prange(nax):
        i = ax_i[ii]
        mx = mex[i]
        for jj in range(nay):
            j = ay_i[jj]
            my = mey[j]
            for k in range(nz):
                dx = (Hy[xp[i], j, k] - Hy[xm[i], j, k]) * idx
                dy = (Hx[i, yp[j], k] - Hx[i, ym[j], k]) * idy
                cx = dx * kex[i]
                cy = dy * key[j]
                if mx >= 0:
                    p = bex[i] * psi_ezx[mx, j, k] + aex[i] * dx
                    psi_ezx[mx, j, k] = p
                    cx += p
                if my >= 0:
                    p = bey[j] * psi_ezy[i, my, k] + aey[j] * dy
                    psi_ezy[i, my, k] = p
                    cy += p
                Ez[i, j, k] = caz[i, j, k] * Ez[i, j, k] + cbz[i, j, k] * (cx - cy)


@njit(cache=True)
def sum_sq_weighted(a, w):
    s = 0.0
    flat_a = a.ravel()
    flat_w = w.ravel()
    for n in range(flat_a.shape[0]):
        s += flat_w[n] * flat_a[n] * flat_a[n]
    return s


@njit(cache=True)
def sum_prod(a, b):
    s = 0.0
    fa = a.ravel()
    fb = b.ravel()
    for n in range(fa.shape[0]):
        s += fa[n] * fb[n]
    return s


@njit(cache=True)
def first_nonfinite(a):
    fa = a.ravel()
    for n in range(fa.shape[0]):
        v = fa[n]
        if not np.isfinite(v):
            return n
    return -1
