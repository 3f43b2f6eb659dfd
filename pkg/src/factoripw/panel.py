"""Panel container and return preparation.

Outcomes are held as a pre-treatment matrix (T0 x N) plus the final-period
vector observed when treatment switches on. `prepare_returns` turns a raw
price panel into standardized, demeaned log returns with all scaling
parameters estimated on the pre-treatment window only.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DegenerateSeriesError

MEAN_ZERO_TOL = 1e-10


@dataclass
class PanelData:
    """Aligned outcome panel with a single treatment date.

    Attributes
    ----------
    Y_pre : (T0, N) ndarray
        Pre-treatment outcomes, each column mean zero.
    Y_final : (N,) ndarray
        Outcome at the treatment date, on the pre-treatment scale.
    Z : (N,) int ndarray
        Treatment indicator at the final period.
    unit_ids : list of str
    time_labels : list of str
        Labels for the T0 pre-treatment periods plus the final period.
    """

    Y_pre: np.ndarray
    Y_final: np.ndarray
    Z: np.ndarray
    unit_ids: list = field(default_factory=list)
    time_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.Y_pre = np.asarray(self.Y_pre, dtype=np.float64)
        self.Y_final = np.asarray(self.Y_final, dtype=np.float64)
        self.Z = np.asarray(self.Z)
        if self.Y_pre.ndim != 2:
            raise DataError("Y_pre must be a 2-d array")
        t0, n = self.Y_pre.shape
        if t0 < 2:
            raise DataError(f"need at least 2 pre-treatment periods, got {t0}")
        if self.Y_final.shape != (n,):
            raise DataError("Y_final length does not match the unit count")
        if self.Z.shape != (n,):
            raise DataError("Z length does not match the unit count")
        if not np.isfinite(self.Y_pre).all() or not np.isfinite(self.Y_final).all():
            raise DataError("panel contains missing or non-finite outcomes")
        zvals = np.unique(self.Z)
        if not np.isin(zvals, (0, 1)).all():
            raise DataError("Z must be binary (0/1)")
        if not (0 in zvals and 1 in zvals):
            raise DataError("Z must contain at least one treated and one control unit")
        self.Z = self.Z.astype(np.int64)
        col_means = self.Y_pre.mean(axis=0)
        worst = np.max(np.abs(col_means))
        if worst > MEAN_ZERO_TOL:
            raise DataError(
                f"Y_pre columns must be mean zero (max |mean| = {worst:.3e}); "
                "run prepare_returns first"
            )
        if not self.unit_ids:
            self.unit_ids = [f"unit_{i}" for i in range(n)]
        if not self.time_labels:
            self.time_labels = [f"t_{t}" for t in range(t0 + 1)]
        if len(self.unit_ids) != n:
            raise DataError("unit_ids length does not match the unit count")
        if len(self.time_labels) != t0 + 1:
            raise DataError("time_labels must cover the T0 pre-periods plus the final period")

    @property
    def n_pre_periods(self):
        return self.Y_pre.shape[0]

    @property
    def n_units(self):
        return self.Y_pre.shape[1]


def standardize_window(pre, final):
    """Scale each column to unit sample sd then shift to mean zero, using
    moments of `pre` only; apply the identical affine map to `final`.

    Returns (pre_std, final_std). Raises on zero-variance columns.
    """
    pre = np.asarray(pre, dtype=np.float64)
    final = np.asarray(final, dtype=np.float64)
    sd = pre.std(axis=0, ddof=1)
    dead = np.flatnonzero(sd <= 0.0)
    if dead.size:
        raise DegenerateSeriesError(
            f"zero-variance pre-treatment series at column(s) {dead.tolist()}"
        )
    scaled = pre / sd
    shift = scaled.mean(axis=0)
    return scaled - shift, final / sd - shift


def prepare_returns(prices):
    """Log returns, standardized and demeaned on the pre-treatment window.

    Parameters
    ----------
    prices : (T0+2, N) ndarray
        Strictly positive price levels; the last row is the final
        (treatment-period) observation.

    Returns
    -------
    (T0+1, N) ndarray
        Rows 0..T0-1 are pre-treatment returns with unit sample sd and mean
        zero per column; the last row is the final-period return mapped
        through the same per-unit scale and shift (no look-ahead).
    """
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 2:
        raise DataError("prices must be a 2-d array")
    if prices.shape[0] < 4:
        raise DataError(
            "need at least 4 price rows (2 pre-treatment returns plus the final period)"
        )
    if not np.isfinite(prices).all():
        raise DataError("prices contain missing or non-finite values")
    bad = np.argwhere(prices <= 0.0)
    if bad.size:
        t, i = bad[0]
        raise DataError(f"non-positive price at time row {t}, unit column {i}")
    returns = np.diff(np.log(prices), axis=0)
    pre, final = standardize_window(returns[:-1], returns[-1])
    out = np.empty_like(returns)
    out[:-1] = pre
    out[-1] = final
    return out
