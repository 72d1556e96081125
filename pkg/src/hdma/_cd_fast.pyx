# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent kernel for weighted-Lasso subproblems."""

from libc.math cimport fabs


cdef inline double _soft(double z, double t) noexcept nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def cd_quadratic(const double[::1, :] X, const double[::1] w, double[::1] r,
                 double[::1] beta, const double[::1] lam,
                 const Py_ssize_t[::1] coords, const double[::1] colsq,
                 int max_iter, double tol):
    """Minimize ``(1/2n) sum_i w_i r_i^2 + sum_j lam_j |beta_j|`` over ``coords``.

    ``r`` must hold the working residual ``z - X @ beta`` on entry; ``r`` and
    ``beta`` are updated in place. ``colsq[j]`` is ``(1/n) sum_i w_i X_ij^2``.

    Returns ``(n_sweeps, converged)``.
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t m = coords.shape[0]
    cdef Py_ssize_t i, j, a
    cdef int it, n_sweeps = 0
    cdef double inv_n = 1.0 / n
    cdef double g, old, new, delta, max_change, c
    cdef bint force_full = True, full_sweep, converged = False

    with nogil:
        for it in range(max_iter):
            full_sweep = force_full or (it % 10 == 0)
            max_change = 0.0
            for a in range(m):
                j = coords[a]
                old = beta[j]
                c = colsq[j]
                if c <= 0.0:
                    continue
                if not full_sweep and old == 0.0:
                    continue
                g = 0.0
                for i in range(n):
                    g += w[i] * X[i, j] * r[i]
                g = g * inv_n + c * old
                new = _soft(g, lam[j]) / c
                delta = new - old
                if delta != 0.0:
                    beta[j] = new
                    for i in range(n):
                        r[i] -= delta * X[i, j]
                    if fabs(delta) > max_change:
                        max_change = fabs(delta)
            n_sweeps += 1
            if max_change < tol:
                if full_sweep:
                    converged = True
                    break
                force_full = True
            else:
                force_full = False
    return n_sweeps, bool(converged)
