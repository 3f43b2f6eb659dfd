# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Newton-Raphson logistic kernel.

The one per-replication loop that profits from compilation (the moment
kernels are BLAS-bound and stay in numpy; see benchmarks/bench_kernels.py).
Must match ``_kernels_py.logistic_newton`` up to float rounding from
reduction order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, sqrt

cnp.import_array()

NEWTON_CONVERGED = 0
NEWTON_MAX_ITER = 1
NEWTON_DIVERGED = 2
NEWTON_SINGULAR = 3


cdef double _sigmoid1(double v) noexcept nogil:
    cdef double ev
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    ev = exp(v)
    return ev / (1.0 + ev)


cdef double _loglik_from_index(double[::1] v, double[::1] z) noexcept nogil:
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double ll = 0.0, vi, softplus
    for i in range(n):
        vi = v[i]
        if vi > 0.0:
            softplus = vi + log1p(exp(-vi))
        else:
            softplus = log1p(exp(vi))
        ll += z[i] * vi - softplus
    return ll


cdef void _index(double[:, ::1] X, double[::1] beta, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = X.shape[0], p = X.shape[1]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += X[i, j] * beta[j]
        out[i] = acc


cdef int _chol_solve(double[:, ::1] A, double[::1] rhs, double[::1] x) noexcept nogil:
    """Solve A x = rhs for symmetric PD A (overwritten). 0 ok, 1 singular."""
    cdef Py_ssize_t i, j, k, p = A.shape[0]
    cdef double s, maxdiag = 0.0
    for i in range(p):
        if A[i, i] > maxdiag:
            maxdiag = A[i, i]
    if maxdiag <= 0.0:
        return 1
    for j in range(p):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 1e-14 * maxdiag:
            return 1
        A[j, j] = sqrt(s)
        for i in range(j + 1, p):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(p):
        s = rhs[i]
        for k in range(i):
            s -= A[i, k] * x[k]
        x[i] = s / A[i, i]
    for i in range(p - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, p):
            s -= A[k, i] * x[k]
        x[i] = s / A[i, i]
    return 0


def logistic_newton(X, z, max_iter=100, score_tol=1e-8, step_tol=1e-10,
                    max_halvings=30, beta_cap=1e3):
    """Newton-Raphson logistic MLE with step halving; see _kernels_py."""
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], p = Xv.shape[1]
    cdef int it_max = int(max_iter), halved_max = int(max_halvings)
    cdef double stol = float(score_tol), dtol = float(step_tol)
    cdef double cap = float(beta_cap)

    beta_arr = np.zeros(p)
    cand_arr = np.empty(p)
    g_arr = np.empty(p)
    d_arr = np.empty(p)
    hess_arr = np.empty((p, p))
    v_arr = np.empty(n)
    e_arr = np.empty(n)
    path_arr = np.empty(it_max + 1)
    cdef double[::1] beta = beta_arr, cand = cand_arr, g = g_arr, d = d_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double[::1] v = v_arr, e = e_arr, path = path_arr

    cdef Py_ssize_t i, j, k
    cdef int it, h, status = NEWTON_MAX_ITER, n_iter = 0, accepted
    cdef double ll, cand_ll, gmax, w, step, improvement, bmax, dmax

    _index(Xv, beta, v)
    ll = _loglik_from_index(v, zv)
    path[0] = ll

    for it in range(it_max):
        _index(Xv, beta, v)
        for i in range(n):
            e[i] = _sigmoid1(v[i])
        gmax = 0.0
        for j in range(p):
            w = 0.0
            for i in range(n):
                w += Xv[i, j] * (zv[i] - e[i])
            g[j] = w
            if fabs(w) > gmax:
                gmax = fabs(w)
        if gmax < stol:
            status = NEWTON_CONVERGED
            break
        for j in range(p):
            for k in range(j, p):
                w = 0.0
                for i in range(n):
                    w += e[i] * (1.0 - e[i]) * Xv[i, j] * Xv[i, k]
                hess[j, k] = w
                hess[k, j] = w
        if _chol_solve(hess, g, d):
            status = NEWTON_SINGULAR
            break
        step = 1.0
        accepted = 0
        for h in range(halved_max + 1):
            for j in range(p):
                cand[j] = beta[j] + step * d[j]
            _index(Xv, cand, v)
            cand_ll = _loglik_from_index(v, zv)
            if cand_ll >= ll:
                accepted = 1
                break
            step *= 0.5
        if not accepted:
            status = NEWTON_CONVERGED
            break
        improvement = cand_ll - ll
        bmax = 0.0
        dmax = 0.0
        for j in range(p):
            beta[j] = cand[j]
            if fabs(beta[j]) > bmax:
                bmax = fabs(beta[j])
            if fabs(step * d[j]) > dmax:
                dmax = fabs(step * d[j])
        ll = cand_ll
        n_iter += 1
        path[n_iter] = ll
        if bmax > cap and improvement < 1e-10:
            status = NEWTON_DIVERGED
            break
        if dmax < dtol:
            status = NEWTON_CONVERGED
            break

    return beta_arr, status, n_iter, path_arr[: n_iter + 1].copy()
