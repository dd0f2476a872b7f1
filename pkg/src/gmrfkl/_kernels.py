"""Numba inner loops for sequential Gibbs sweeps.

The kernels only do deterministic arithmetic: all randomness is pre-drawn
outside (as ready-to-add noise terms), which keeps runs reproducible across
numba versions and lets the d = 1 vector kernel reproduce the scalar kernel
bit for bit (same neighbor accumulation order, same single multiply-add).

Sites are updated in place in raster order, so later sites in the same sweep
see already-updated values of earlier sites -- the defining property of a
*sequential* (as opposed to synchronous) sweep.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def sweep_scalar(x, mu, beta, eps):
    """One in-place raster-order Gibbs sweep of a scalar field.

    ``x`` is the (H, W) state, ``eps`` the pre-drawn noise (already scaled
    by the conditional standard deviation).  Each site is replaced by
    ``mu + beta * (neighbor_sum - 8 * mu) + eps`` with toroidal wrapping.
    """
    H, W = x.shape
    for r in range(H):
        rm = r - 1 if r > 0 else H - 1
        rp = r + 1 if r < H - 1 else 0
        for c in range(W):
            cm = c - 1 if c > 0 else W - 1
            cp = c + 1 if c < W - 1 else 0
            s = (x[rm, cm] + x[rm, c] + x[rm, cp]
                 + x[r, cm] + x[r, cp]
                 + x[rp, cm] + x[rp, c] + x[rp, cp])
            x[r, c] = mu + beta * (s - 8.0 * mu) + eps[r, c]


@njit(cache=True)
def sweep_vector(x, mu, beta, eps):
    """Vector-field analogue of :func:`sweep_scalar`.

    ``x`` is (H, W, d), ``mu`` is (d,), ``eps`` is pre-drawn noise already
    correlated across components (z @ L.T for a Cholesky factor L).  The
    neighbor sum is accumulated per component in exactly the scalar kernel's
    term order, so for d = 1 the arithmetic is identical bit for bit.
    """
    H, W, d = x.shape
    for r in range(H):
        rm = r - 1 if r > 0 else H - 1
        rp = r + 1 if r < H - 1 else 0
        for c in range(W):
            cm = c - 1 if c > 0 else W - 1
            cp = c + 1 if c < W - 1 else 0
            for k in range(d):
                s = (x[rm, cm, k] + x[rm, c, k] + x[rm, cp, k]
                     + x[r, cm, k] + x[r, cp, k]
                     + x[rp, cm, k] + x[rp, c, k] + x[rp, cp, k])
                x[r, c, k] = mu[k] + beta * (s - 8.0 * mu[k]) + eps[r, c, k]
