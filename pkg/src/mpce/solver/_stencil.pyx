# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop for the explicit substepped reaction-diffusion update.

Mirrors ``_stencil_py.substeps`` exactly (same arithmetic and evaluation
order); the NumPy version is the import-time fallback when this extension
is unavailable.
"""

from libc.math cimport isfinite

BACKEND = "compiled"


def substeps(double[:, ::1] u, double[:, ::1] v,
             double[:, ::1] u_buf, double[:, ::1] v_buf,
             int m, double dt, double inv_hx2, double inv_hy2,
             double d0, double d1, double a, double b,
             bint reaction, bint periodic):
    """Advance (u, v) in place by m forward-Euler substeps of size dt.

    Returns -1 on success, else the 0-based substep index at which a
    non-finite value first appeared.
    """
    cdef Py_ssize_t ny = u.shape[0]
    cdef Py_ssize_t nx = u.shape[1]
    cdef double[:, ::1] cu = u, cv = v, wu = u_buf, wv = v_buf
    cdef double[:, ::1] tmp
    cdef Py_ssize_t i, j, jm, jp, im, ip
    cdef Py_ssize_t step
    cdef double lap_u, lap_v, uc, vc, uu
    cdef double one_b = 1.0 + b
    cdef bint bad

    for step in range(m):
        bad = False
        for j in range(ny):
            if j > 0:
                jm = j - 1
            else:
                jm = ny - 1 if periodic else 1
            if j < ny - 1:
                jp = j + 1
            else:
                jp = 0 if periodic else ny - 2
            for i in range(nx):
                if i > 0:
                    im = i - 1
                else:
                    im = nx - 1 if periodic else 1
                if i < nx - 1:
                    ip = i + 1
                else:
                    ip = 0 if periodic else nx - 2

                uc = cu[j, i]
                vc = cv[j, i]
                lap_u = (cu[j, im] - 2.0 * uc + cu[j, ip]) * inv_hx2 \
                      + (cu[jm, i] - 2.0 * uc + cu[jp, i]) * inv_hy2
                lap_v = (cv[j, im] - 2.0 * vc + cv[j, ip]) * inv_hx2 \
                      + (cv[jm, i] - 2.0 * vc + cv[jp, i]) * inv_hy2
                if reaction:
                    uu = uc * uc
                    wu[j, i] = uc + dt * (d0 * lap_u + (a - one_b * uc + vc * uu))
                    wv[j, i] = vc + dt * (d1 * lap_v + (b * uc - vc * uu))
                else:
                    wu[j, i] = uc + dt * (d0 * lap_u)
                    wv[j, i] = vc + dt * (d1 * lap_v)
                if not (isfinite(wu[j, i]) and isfinite(wv[j, i])):
                    bad = True
        if bad:
            return step
        tmp = cu; cu = wu; wu = tmp
        tmp = cv; cv = wv; wv = tmp

    if m % 2 == 1:
        # latest state lives in the buffers; copy it back
        u[:, :] = cu
        v[:, :] = cv
    return -1
