"""Logistic propensity score on estimated factor loadings.

The treatment model is e_i = logistic(b0 + loadings_i' b), fit by
Newton-Raphson MLE. Beyond the fit itself, this module exposes the score,
the information matrix, the Jacobian of the score in the loadings, and the
coefficient variance that propagates the loading-estimation noise through
the per-unit factor-residual moments (`phi_i`).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend as kernels
from .exceptions import (
    ConvergenceError,
    ExtremePropensityWarning,
    SeparationError,
    SingularInformationError,
)
from .factors import FactorFit

SCORE_EPS = 1e-12
EXTREME_SCORE_BOUND = 0.99
SINGULAR_RTOL = 1e-12


@dataclass
class PropensityFit:
    """Fitted logistic treatment model.

    ``beta`` is (r+1,) with the intercept first; ``design`` is the N x (r+1)
    matrix with rows (1, loadings_i'); ``scores`` are the fitted
    probabilities clipped to (1e-12, 1 - 1e-12); ``info_matrix`` stores
    E_bb = (1/N) sum_i d(score_i)/d(beta), i.e. the negative-definite
    Hessian of the mean log-likelihood.
    """

    beta: np.ndarray
    scores: np.ndarray
    design: np.ndarray
    Z: np.ndarray
    loglik: float
    info_matrix: np.ndarray
    converged: bool
    iterations: int
    loglik_path: np.ndarray

    @property
    def rank(self):
        return self.beta.shape[0] - 1


def _sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def score(beta, x, z):
    """Per-observation score x * (z - e) with e = logistic(x'beta)."""
    x = np.asarray(x, dtype=np.float64)
    e = _sigmoid(x @ np.asarray(beta, dtype=np.float64))
    return x * (z - e)


def information_matrix(beta, design):
    """Empirical E_bb = -(1/N) sum_i e_i (1 - e_i) x_i x_i'."""
    design = np.asarray(design, dtype=np.float64)
    e = _sigmoid(design @ np.asarray(beta, dtype=np.float64))
    w = e * (1.0 - e)
    return -(design.T * w) @ design / design.shape[0]


def score_loading_jacobian(beta, lambda_i, z):
    """Derivative of the score in the loadings, an (r+1) x r matrix.

    With x = (1, lambda'), e = logistic(x'beta) and b = loading part of
    beta: J * (z - e) - e(1-e) * outer(x, b), where J is zero in the first
    row and the identity below.
    """
    beta = np.asarray(beta, dtype=np.float64)
    lam = np.atleast_1d(np.asarray(lambda_i, dtype=np.float64))
    r = lam.shape[0]
    x = np.concatenate(([1.0], lam))
    e = float(_sigmoid(x @ beta))
    out = -e * (1.0 - e) * np.outer(x, beta[1:])
    out[1:, :] += (z - e) * np.eye(r)
    return out


def _design_matrix(Lambda_hat):
    Lambda_hat = np.asarray(Lambda_hat, dtype=np.float64)
    if Lambda_hat.ndim != 2:
        raise ValueError("loadings must be a 2-d array")
    n = Lambda_hat.shape[0]
    return np.column_stack([np.ones(n), Lambda_hat])


def fit_logistic(Lambda_hat, Z, max_iter=100, score_tol=1e-8, step_tol=1e-10):
    """Fit the logistic treatment model on the estimated loadings.

    Parameters
    ----------
    Lambda_hat : (N, r) ndarray
        Estimated loadings; an intercept column is prepended internally.
    Z : (N,) array of 0/1
        Treatment indicator.

    Raises
    ------
    SeparationError
        When the coefficients diverge with a stalled log-likelihood.
    ConvergenceError
        When Newton-Raphson fails within the iteration budget.
    """
    X = _design_matrix(Lambda_hat)
    Z = np.asarray(Z)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need N > r + 1 observations, got N={n}, r+1={p}")
    zvals = np.unique(Z)
    if not (np.isin(zvals, (0, 1)).all() and 0 in zvals and 1 in zvals):
        raise ValueError("Z must contain both classes")
    z = Z.astype(np.float64)

    beta, status, n_iter, path = kernels.logistic_newton(
        X, z, max_iter=max_iter, score_tol=score_tol, step_tol=step_tol
    )
    # Complete separation lets the score vanish at the boundary (every
    # fitted probability equals its outcome, log-likelihood at zero), which
    # the iteration reports as converged; treat it as separation too.
    if status == kernels.NEWTON_DIVERGED or \
            (status == kernels.NEWTON_CONVERGED and path[-1] > -1e-6):
        worst = int(np.argmax(np.abs(beta)))
        direction = "intercept" if worst == 0 else f"loading column {worst}"
        raise SeparationError(
            f"separation detected: coefficients diverging along the {direction}"
        )
    if status != kernels.NEWTON_CONVERGED:
        reason = "singular Hessian" if status == kernels.NEWTON_SINGULAR \
            else f"no convergence in {max_iter} iterations"
        raise ConvergenceError(f"logistic fit failed: {reason}",
                               beta=beta, iterations=n_iter)

    e = np.clip(_sigmoid(X @ beta), SCORE_EPS, 1.0 - SCORE_EPS)
    extreme = np.flatnonzero((e > EXTREME_SCORE_BOUND) | (e < 1.0 - EXTREME_SCORE_BOUND))
    if extreme.size:
        warnings.warn(
            f"{extreme.size} unit(s) with fitted score outside "
            f"[{1 - EXTREME_SCORE_BOUND:.2f}, {EXTREME_SCORE_BOUND:.2f}]: "
            f"{extreme[:10].tolist()}",
            ExtremePropensityWarning,
            stacklevel=2,
        )
    return PropensityFit(
        beta=beta,
        scores=e,
        design=X,
        Z=Z.astype(np.int64),
        loglik=float(path[-1]),
        info_matrix=information_matrix(beta, X),
        converged=True,
        iterations=n_iter,
        loglik_path=path,
    )


def solve_information(info_matrix, rhs):
    """Solve (-E_bb) x = rhs guarding against singularity."""
    neg_info = -np.asarray(info_matrix, dtype=np.float64)
    svals = np.linalg.svd(neg_info, compute_uv=False)
    if svals[0] <= 0.0 or svals[-1] / svals[0] < SINGULAR_RTOL:
        raise SingularInformationError(
            "information matrix is singular to tolerance 1e-12"
        )
    return np.linalg.solve(neg_info, rhs)


def phi_i(ffit: FactorFit, i):
    """i.i.d.-error moment (1/T0) sum_t F_t F_t' resid[t,i]^2 for one unit."""
    F = ffit.F_hat
    xi2 = ffit.residuals[:, int(i)] ** 2
    return (F.T * xi2) @ F / F.shape[0]


def phi_all(ffit: FactorFit):
    """Stacked phi_i for every unit, shape (N, r, r)."""
    return kernels.phi_stack(ffit.F_hat, ffit.residuals)


def beta_variance(fit: PropensityFit, ffit: FactorFit):
    """Asymptotic covariance of sqrt(N) (beta_hat - beta).

    Sandwich with two middle terms: the empirical score second moment and
    the loading-noise term contracting each unit's score-loading Jacobian
    against phi_i / T0 (both sides through (F'F/T0)^{-1}, computed rather
    than assumed to be the identity). Per-coefficient standard errors are
    sqrt(diag(V/N)); see `adjusted_beta_se`.
    """
    if not fit.converged:
        raise ValueError("propensity fit did not converge")
    if fit.design.shape[1] != ffit.rank + 1:
        raise ValueError("factor rank does not match the propensity design")
    X = fit.design
    e = fit.scores
    z = fit.Z.astype(np.float64)
    n, p = X.shape
    t0 = ffit.n_pre_periods

    S = X * (z - e)[:, None]
    meat = S.T @ S / n

    gram = ffit.F_hat.T @ ffit.F_hat / t0
    g_inv = np.linalg.inv(gram)
    phi = kernels.phi_stack(ffit.F_hat, ffit.residuals)      # (N, r, r)
    mid = g_inv @ phi @ g_inv / t0                            # (N, r, r)
    a = z - e
    s2 = e * (1.0 - e)
    # J_i = a_i * Jconst - s2_i * outer(x_i, beta_lam), shaped (N, p, r)
    jconst = np.zeros((p, p - 1))
    jconst[1:, :] = np.eye(p - 1)
    J = a[:, None, None] * jconst[None, :, :] \
        - s2[:, None, None] * (X[:, :, None] * fit.beta[None, None, 1:])
    meat = meat + np.einsum("npr,nrs,nqs->pq", J, mid, J) / n

    half = solve_information(fit.info_matrix, meat)
    return solve_information(fit.info_matrix, half.T)


def adjusted_beta_se(fit: PropensityFit, ffit: FactorFit):
    """Reported per-coefficient standard errors sqrt(diag(V beta / N))."""
    v = beta_variance(fit, ffit)
    return np.sqrt(np.diag(v) / fit.design.shape[0])
