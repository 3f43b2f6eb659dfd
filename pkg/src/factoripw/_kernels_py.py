"""Pure-numpy reference implementations of the hot kernels.

Selected by :mod:`factoripw._backend` when the compiled extension is absent
or disabled. Semantics must match ``_core.pyx`` exactly (up to float
rounding from different reduction orders).
"""

import numpy as np

# logistic_newton status codes (shared with the compiled core)
NEWTON_CONVERGED = 0
NEWTON_MAX_ITER = 1
NEWTON_DIVERGED = 2
NEWTON_SINGULAR = 3


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def _loglik(v, z):
    # sum_i [z_i v_i - log(1 + exp(v_i))], computed stably
    softplus = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))
    return float(np.sum(z * v - softplus))


def logistic_newton(X, z, max_iter=100, score_tol=1e-8, step_tol=1e-10,
                    max_halvings=30, beta_cap=1e3):
    """Newton-Raphson MLE for binary logistic regression with step halving.

    Returns ``(beta, status, n_iter, loglik_path)`` where ``loglik_path``
    holds the log-likelihood of every accepted iterate (index 0 = start).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n, p = X.shape
    beta = np.zeros(p)
    ll = _loglik(X @ beta, z)
    path = [ll]
    status = NEWTON_MAX_ITER
    n_iter = 0
    for _ in range(max_iter):
        v = X @ beta
        e = _sigmoid(v)
        g = X.T @ (z - e)
        if np.max(np.abs(g)) < score_tol:
            status = NEWTON_CONVERGED
            break
        w = e * (1.0 - e)
        hess = (X.T * w) @ X  # = -Hessian of the total log-likelihood
        try:
            direction = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            status = NEWTON_SINGULAR
            break
        step = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            cand = beta + step * direction
            cand_ll = _loglik(X @ cand, z)
            if cand_ll >= ll:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Newton direction is ascent for the concave log-likelihood, so
            # this only happens at float-level stationarity.
            status = NEWTON_CONVERGED
            break
        improvement = cand_ll - ll
        beta = cand
        ll = cand_ll
        n_iter += 1
        path.append(ll)
        if np.max(np.abs(beta)) > beta_cap and improvement < 1e-10:
            status = NEWTON_DIVERGED
            break
        if np.max(np.abs(step * direction)) < step_tol:
            status = NEWTON_CONVERGED
            break
    return beta, status, n_iter, np.asarray(path)


def phi_stack(F, resid):
    """Per-unit factor-weighted residual second moments.

    ``out[i] = (1/T0) * sum_t F_t F_t' resid[t, i]**2`` with shape (N, r, r).
    """
    F = np.asarray(F, dtype=np.float64)
    resid = np.asarray(resid, dtype=np.float64)
    t0, r = F.shape
    outer = (F[:, :, None] * F[:, None, :]).reshape(t0, r * r)
    out = (resid.T ** 2) @ outer / t0
    return out.reshape(resid.shape[1], r, r)


def influence_corrections(F, resid, g_inv, X, e, z, beta_lam):
    """Per-unit loading-noise corrections to the propensity score equation.

    For each unit: ``c_i = (z_i - e_i) * [0; v_i] - e_i(1-e_i) (b'v_i) x_i``
    with ``v_i = g_inv @ (sum_t F_t resid[t,i]) / T0`` and ``b = beta_lam``.
    Returns an (N, p) array, p = r + 1.
    """
    F = np.asarray(F, dtype=np.float64)
    resid = np.asarray(resid, dtype=np.float64)
    t0 = F.shape[0]
    v = (resid.T @ F) @ g_inv.T / t0                 # (N, r)
    a = np.asarray(z, dtype=np.float64) - e          # (N,)
    s = e * (1.0 - e) * (v @ beta_lam)               # (N,)
    out = np.empty((X.shape[0], X.shape[1]))
    out[:, 0] = -s * X[:, 0]
    out[:, 1:] = a[:, None] * v - s[:, None] * X[:, 1:]
    return out
