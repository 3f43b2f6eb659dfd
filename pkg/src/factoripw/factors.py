"""Principal-components estimation of the approximate factor model.

The pre-treatment panel Y (T0 x N) is decomposed as Y = F L' + residuals
under the normalization F'F/T0 = I_r with L'L diagonal and decreasing.
Estimation goes through the T0 x T0 Gram matrix Y Y' (the T0 < N regime),
so F is sqrt(T0) times the top eigenvectors and L = Y'F/T0; the rank-r
reconstruction F L' coincides with the truncated SVD of Y.
"""

from dataclasses import dataclass

import numpy as np

EIGEN_GAP_RTOL = 1e-10
# Residual mean squares below this fraction of the total are numerical zero;
# keeps the log criteria well defined on exactly low-rank panels.
IC_FLOOR_REL = 1e-24


@dataclass
class FactorFit:
    """Fitted factor model at a given rank.

    ``F_hat`` is (T0, r) with F_hat'F_hat/T0 = I_r, ``Lambda_hat`` is (N, r)
    with diagonal decreasing cross-products, ``residuals`` is the exact
    difference Y - F_hat Lambda_hat'. ``eigengap_warning`` flags nearly
    equal Gram eigenvalues among the leading r+1 (distinctness at risk).
    """

    F_hat: np.ndarray
    Lambda_hat: np.ndarray
    residuals: np.ndarray
    rank: int
    eigenvalues: np.ndarray
    eigengap_warning: bool = False

    @property
    def n_pre_periods(self):
        return self.F_hat.shape[0]

    @property
    def n_units(self):
        return self.Lambda_hat.shape[0]


@dataclass
class RankSelection:
    """Information-criterion table over candidate ranks."""

    r_ic1: int
    r_ic2: int
    ranks: np.ndarray
    v: np.ndarray
    ic1: np.ndarray
    ic2: np.ndarray

    def rows(self):
        return list(zip(self.ranks.tolist(), self.v.tolist(),
                        self.ic1.tolist(), self.ic2.tolist()))


def _check_rank(r, t0, n):
    limit = min(t0, n) - 1
    if not (1 <= r <= limit):
        raise ValueError(f"rank {r} out of range [1, {limit}] for a {t0} x {n} panel")


def estimate_factors(Y, r):
    """Estimate factors and loadings by principal components at rank ``r``.

    Parameters
    ----------
    Y : (T0, N) ndarray
        Pre-treatment outcome panel, columns demeaned by the caller.
    r : int
        Number of factors, 1 <= r <= min(T0, N) - 1.

    Returns
    -------
    FactorFit
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("Y must be a 2-d array")
    t0, n = Y.shape
    _check_rank(int(r), t0, n)
    r = int(r)

    gram = Y @ Y.T
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    F = np.sqrt(t0) * eigvecs[:, :r]
    L = Y.T @ F / t0

    # Column signs are free under the normalization; pin each so the loading
    # of largest magnitude is positive (no effect on F L').
    for j in range(r):
        anchor = np.argmax(np.abs(L[:, j]))
        if L[anchor, j] < 0:
            L[:, j] = -L[:, j]
            F[:, j] = -F[:, j]

    scale = max(eigvals[0], np.finfo(float).tiny)
    top = eigvals[: min(r + 1, t0)]
    gaps = np.diff(top) * -1.0
    warning = bool(gaps.size and np.min(gaps) / scale < EIGEN_GAP_RTOL)

    residuals = Y - F @ L.T
    return FactorFit(
        F_hat=F,
        Lambda_hat=L,
        residuals=residuals,
        rank=r,
        eigenvalues=eigvals[:r].copy(),
        eigengap_warning=warning,
    )


def select_num_factors(Y, r_max):
    """Choose the number of factors by the IC1 and IC2 criteria.

    For each k <= r_max, V(k) is the mean squared residual of the rank-k
    principal-components fit and

        IC1(k) = ln V(k) + k * ((N+T0)/(N*T0)) * ln(N*T0/(N+T0))
        IC2(k) = ln V(k) + k * ((N+T0)/(N*T0)) * ln(min(N, T0))

    Ties break toward the smaller rank.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    t0, n = Y.shape
    r_max = int(r_max)
    _check_rank(r_max, t0, n)

    # V(k) follows from one eigendecomposition: the rank-k residual sum of
    # squares is ||Y||_F^2 minus the k leading Gram eigenvalues.
    eigvals = np.linalg.eigvalsh(Y @ Y.T)[::-1]
    total = float(np.sum(Y * Y))
    ranks = np.arange(1, r_max + 1)
    rss = total - np.cumsum(eigvals[:r_max])
    v = np.maximum(rss, 0.0) / (n * t0)
    v = np.maximum(v, IC_FLOOR_REL * total / (n * t0))

    penalty = (n + t0) / (n * t0) * ranks
    ic1 = np.log(v) + penalty * np.log(n * t0 / (n + t0))
    ic2 = np.log(v) + penalty * np.log(min(n, t0))
    return RankSelection(
        r_ic1=int(ranks[np.argmin(ic1)]),
        r_ic2=int(ranks[np.argmin(ic2)]),
        ranks=ranks,
        v=v,
        ic1=ic1,
        ic2=ic2,
    )
