"""Row-block compute kernels.

Every kernel takes a half-open row range ``[i0, i1)`` and writes only the
output rows in that range, reading shared inputs that nobody mutates during
the call.  That is the whole contract ``ExecPlan.parallel_sweep`` relies on:
any partition of the rows yields bitwise-identical output.

Kernels are compiled with ``nogil=True`` so worker threads run them
concurrently.  ``fastmath`` stays off: no reassociation, no FMA contraction.
"""

import numba
import numpy as np


@numba.njit(nogil=True, cache=True)
def ordered_sum(values):
    # strict left-to-right accumulation; without fastmath LLVM may not reorder
    total = 0.0
    for k in range(values.shape[0]):
        total += values[k]
    return total


@numba.njit(nogil=True, cache=True)
def stencil_rows(u, c_north, c_south, c_east, c_west, w_north, w_south, out, i0, i1):
    """out = M u on rows [i0, i1), written in difference (flux) form.

    Pole rows are produced by whichever call owns row 0 / row nt-1.  The
    difference form makes M annihilate constants exactly, not just to
    roundoff.
    """
    nt, nph = u.shape
    lo = max(i0, 1)
    hi = min(i1, nt - 1)
    for i in range(lo, hi):
        for j in range(nph):
            jw = j - 1 if j > 0 else nph - 1
            je = j + 1 if j < nph - 1 else 0
            uc = u[i, j]
            out[i, j] = (c_north[i, j] * (u[i - 1, j] - uc)
                         + c_south[i, j] * (u[i + 1, j] - uc)
                         + c_west[i, j] * (u[i, jw] - uc)
                         + c_east[i, j] * (u[i, je] - uc))
    if i0 <= 0 < i1:
        up = u[0, 0]
        acc = 0.0
        for j in range(nph):
            acc += w_north[j] * (u[1, j] - up)
        for j in range(nph):
            out[0, j] = acc
    if i0 <= nt - 1 < i1:
        up = u[nt - 1, 0]
        acc = 0.0
        for j in range(nph):
            acc += w_south[j] * (u[nt - 2, j] - up)
        for j in range(nph):
            out[nt - 1, j] = acc


@numba.njit(nogil=True, cache=True)
def axpy_rows(y0, a, x, out, i0, i1):
    """out = y0 + a*x on rows [i0, i1)."""
    nph = y0.shape[1]
    for i in range(i0, i1):
        for j in range(nph):
            out[i, j] = y0[i, j] + a * x[i, j]


@numba.njit(nogil=True, cache=True)
def combine_rows(y0, y_prev, y_prev2, my0, my_prev, mu, nu, mu_tilde_dt, gamma_tilde_dt,
                 out, i0, i1):
    """One RKL2 stage update on rows [i0, i1).

    Written relative to ``y0`` so that a field with ``M y = 0`` passes
    through bitwise unchanged.  ``out`` may alias ``y_prev2``: each element
    is read before it is overwritten.
    """
    nph = y0.shape[1]
    for i in range(i0, i1):
        for j in range(nph):
            base = y0[i, j]
            out[i, j] = (base
                         + mu * (y_prev[i, j] - base)
                         + nu * (y_prev2[i, j] - base)
                         + mu_tilde_dt * my_prev[i, j]
                         + gamma_tilde_dt * my0[i, j])


@numba.njit(nogil=True, cache=True)
def weighted_rows(field, weights, out, i0, i1):
    """out = field * weights elementwise on rows [i0, i1)."""
    nph = field.shape[1]
    for i in range(i0, i1):
        for j in range(nph):
            out[i, j] = field[i, j] * weights[i, j]
