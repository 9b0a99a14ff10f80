"""Numba kernels for the hierarchy right-hand side and time stepping.

State layout: one C-contiguous complex128 array of shape (N, 4) holding
the 2x2 matrices row-wise as (y00, y01, y10, y11).  The system coupling
operator is sigma_x, whose left/right products are index permutations,
so no small-matrix arithmetic appears in the inner loops.

Every output row is written by exactly one thread and its inner
summation order is fixed, so results are bit-identical for any thread
count.
"""

import numba
import numpy as np
from numba import njit, prange

_SIG = (
    "(complex128[:, ::1], complex128[:, ::1], complex128[::1], float64,"
    " int64[::1], int32[::1],"
    " int64[::1], int32[::1], complex128[::1],"
    " int64[::1], int32[::1], complex128[::1])"
)


@njit(_SIG, parallel=True, cache=True)
def hierarchy_rhs(
    y, out, gamma, omega_q,
    up_ptr, up_src,
    dnl_ptr, dnl_src, dnl_coef,
    dnr_ptr, dnr_src, dnr_coef,
):
    n_rows = y.shape[0]
    for r in prange(n_rows):
        g = gamma[r]
        a0 = -g * y[r, 0]
        a1 = (1j * omega_q - g) * y[r, 1]
        a2 = (-1j * omega_q - g) * y[r, 2]
        a3 = -g * y[r, 3]

        s0 = 0.0 + 0.0j
        s1 = 0.0 + 0.0j
        s2 = 0.0 + 0.0j
        s3 = 0.0 + 0.0j
        for e in range(up_ptr[r], up_ptr[r + 1]):
            src = up_src[e]
            s0 += y[src, 0]
            s1 += y[src, 1]
            s2 += y[src, 2]
            s3 += y[src, 3]
        # -i [sigma_x, S]: sigma_x S swaps rows, S sigma_x swaps columns
        a0 += -1j * (s2 - s1)
        a1 += -1j * (s3 - s0)
        a2 += -1j * (s0 - s3)
        a3 += -1j * (s1 - s2)

        for e in range(dnl_ptr[r], dnl_ptr[r + 1]):
            src = dnl_src[e]
            c = dnl_coef[e]
            a0 += c * y[src, 2]
            a1 += c * y[src, 3]
            a2 += c * y[src, 0]
            a3 += c * y[src, 1]

        for e in range(dnr_ptr[r], dnr_ptr[r + 1]):
            src = dnr_src[e]
            c = dnr_coef[e]
            a0 += c * y[src, 1]
            a1 += c * y[src, 0]
            a2 += c * y[src, 3]
            a3 += c * y[src, 2]

        out[r, 0] = a0
        out[r, 1] = a1
        out[r, 2] = a2
        out[r, 3] = a3


@njit("(complex128[::1], complex128[::1], float64, complex128[::1])",
      parallel=True, cache=True)
def axpy(out, x, a, yv):
    for i in prange(x.size):
        out[i] = x[i] + a * yv[i]


@njit("(complex128[::1], complex128[::1], complex128[::1], complex128[::1],"
      " complex128[::1], float64)", parallel=True, cache=True)
def rk4_combine(y, k1, k2, k3, k4, dt):
    c = dt / 6.0
    for i in prange(y.size):
        y[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@njit("(complex128[::1], complex128[::1], complex128[::1], complex128[::1],"
      " complex128[::1])", parallel=True, cache=True)
def etd_stage(out, e2, y, q, nv):
    """out = e2*y + q*nv (first/second exponential stage)."""
    for i in prange(y.size):
        out[i] = e2[i] * y[i] + q[i] * nv[i]


@njit("(complex128[::1], complex128[::1], complex128[::1], complex128[::1],"
      " complex128[::1], complex128[::1])", parallel=True, cache=True)
def etd_stage_c(out, e2, a, q, nc, na):
    """out = e2*a + q*(2*nc - na) (third exponential stage)."""
    for i in prange(a.size):
        out[i] = e2[i] * a[i] + q[i] * (2.0 * nc[i] - na[i])


@njit("(complex128[::1], complex128[::1], complex128[::1], complex128[::1],"
      " complex128[::1], complex128[::1], complex128[::1], complex128[::1],"
      " complex128[::1])", parallel=True, cache=True)
def etd_combine(y, e, f1, na, f2, nb, nc, f3, nd):
    """y = e*y + f1*na + 2*f2*(nb+nc) + f3*nd (exponential RK4 update)."""
    for i in prange(y.size):
        y[i] = (
            e[i] * y[i]
            + f1[i] * na[i]
            + 2.0 * f2[i] * (nb[i] + nc[i])
            + f3[i] * nd[i]
        )


def set_worker_count(n: int | None):
    """Set the numba thread count (clamped to what the runtime allows)."""
    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
