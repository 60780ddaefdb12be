"""Pure numpy backend for the jump-process inner loop.

consume() must stay arithmetically identical to the Cython version in
_jump_cy.pyx: same operations in the same order per particle, so both
backends produce bit-identical trajectories from the same random blocks.
"""

import numpy as np


def _interp_periodic(xq, yg):
    # piecewise-linear on nodes i/n with wraparound; xq in [0, 1]
    n = yg.shape[0]
    s = xq * n
    i0 = np.floor(s)
    w = s - i0
    i0 = i0.astype(np.int64)
    return yg[i0 % n] * (1.0 - w) + yg[(i0 + 1) % n] * w


def consume(x, v, t, alive, E, U, Z, t_end, alpha, Tg, taug, counts):
    """Advance particles through one pre-drawn block of randomness.

    x, v, t, alive are updated in place.  Each column k of E/U/Z is one
    jump attempt: fly for E, retire with a final flight if past t_end,
    else redraw v from the local Maxwellian (thermostat field taug, or
    self-field Tg with probability alpha).  counts may be a zero-length
    array to disable jump counting.
    """
    kblock = E.shape[1]
    use_counts = counts.shape[0] == x.shape[0]
    for k in range(kblock):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        tj = t[idx] + E[idx, k]
        over = tj > t_end
        ridx = idx[over]
        if ridx.size:
            xr = x[ridx] + v[ridx] * (t_end - t[ridx])
            x[ridx] = xr - np.floor(xr)
            t[ridx] = t_end
            alive[ridx] = False
        midx = idx[~over]
        if midx.size == 0:
            continue
        xm = x[midx] + v[midx] * E[midx, k]
        x[midx] = xm - np.floor(xm)
        t[midx] = tj[~over]
        if use_counts:
            counts[midx] += 1
        hot = U[midx, k] < alpha
        Tloc = _interp_periodic(x[midx], taug)
        if np.any(hot):
            Tloc[hot] = _interp_periodic(x[midx][hot], Tg)
        v[midx] = Z[midx, k] * np.sqrt(Tloc)
