"""Pure-Python coordinate-descent kernel.

Mirrors :func:`hdma._cd_fast.cd_quadratic` line for line; used when the
compiled extension is unavailable or ``HDMA_PURE_PYTHON`` is set.
"""

import numpy as np


def cd_quadratic(X, w, r, beta, lam, coords, colsq, max_iter, tol):
    n = X.shape[0]
    inv_n = 1.0 / n
    force_full = True
    converged = False
    n_sweeps = 0
    for it in range(max_iter):
        full_sweep = force_full or it % 10 == 0
        max_change = 0.0
        for j in coords:
            old = beta[j]
            c = colsq[j]
            if c <= 0.0:
                continue
            if not full_sweep and old == 0.0:
                continue
            xj = X[:, j]
            g = float(np.dot(w * xj, r)) * inv_n + c * old
            t = lam[j]
            if g > t:
                new = (g - t) / c
            elif g < -t:
                new = (g + t) / c
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                r -= delta * xj
                if abs(delta) > max_change:
                    max_change = abs(delta)
        n_sweeps += 1
        if max_change < tol:
            if full_sweep:
                converged = True
                break
            force_full = True
        else:
            force_full = False
    return n_sweeps, converged
