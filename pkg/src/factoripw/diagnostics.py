"""Balance and overlap diagnostics plus the falsification-test protocol.

Balance uses the absolute standardized difference: the gap between
weighted group means over the square root of the summed unweighted
within-group variance rates, which with unit weights is the classic
two-sample t-statistic. Falsification reruns the whole pipeline at a
fictitious earlier treatment date and expects a null effect.
"""

from dataclasses import dataclass

import numpy as np

from .att import AttEstimate, estimate_att
from .exceptions import DataError, EstimandUndefinedError
from .factors import FactorFit, estimate_factors, select_num_factors
from .panel import PanelData, standardize_window
from .propensity import fit_logistic

ASD_THRESHOLD = 1.96


def asd(values, Z, weights=None):
    """Absolute standardized difference between treatment groups.

    Numerator: absolute gap between the weighted group means. Denominator:
    sqrt(s1^2/N1 + s0^2/N0) from the *unweighted* within-group sample
    variances and group counts. ``weights=None`` means unit weights, making
    this the two-sample t-statistic.
    """
    values = np.asarray(values, dtype=np.float64)
    Z = np.asarray(Z)
    w = np.ones_like(values) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    treated = Z == 1
    n1 = int(treated.sum())
    n0 = int((~treated).sum())
    if n1 == 0 or n0 == 0:
        raise EstimandUndefinedError("both treatment groups must be nonempty")
    mean1 = np.sum(values[treated] * w[treated]) / np.sum(w[treated])
    mean0 = np.sum(values[~treated] * w[~treated]) / np.sum(w[~treated])
    s1 = values[treated].var(ddof=1) if n1 > 1 else 0.0
    s0 = values[~treated].var(ddof=1) if n0 > 1 else 0.0
    denom_sq = s1 / n1 + s0 / n0
    if denom_sq <= 0.0:
        raise DataError("degenerate ASD: both groups are constant")
    return float(abs(mean1 - mean0) / np.sqrt(denom_sq))


def att_weights(Z, e):
    """ATT weights: 1 for treated, e/(1-e) for controls."""
    Z = np.asarray(Z)
    e = np.asarray(e, dtype=np.float64)
    return np.where(Z == 1, 1.0, e / (1.0 - e))


@dataclass
class BalanceReport:
    """Per-loading ASD before and after ATT weighting."""

    asd_unweighted: np.ndarray
    asd_weighted: np.ndarray
    flagged: np.ndarray
    max_asd_weighted: float
    threshold: float = ASD_THRESHOLD

    def rows(self):
        return [
            (j, float(self.asd_unweighted[j]), float(self.asd_weighted[j]),
             bool(self.flagged[j]))
            for j in range(self.asd_unweighted.shape[0])
        ]


def balance_report(ffit: FactorFit, Z, e) -> BalanceReport:
    """ASD of every loading column, unweighted and with ATT weights."""
    w = att_weights(Z, e)
    unweighted = np.array([asd(ffit.Lambda_hat[:, j], Z) for j in range(ffit.rank)])
    weighted = np.array(
        [asd(ffit.Lambda_hat[:, j], Z, w) for j in range(ffit.rank)]
    )
    return BalanceReport(
        asd_unweighted=unweighted,
        asd_weighted=weighted,
        flagged=weighted > ASD_THRESHOLD,
        max_asd_weighted=float(weighted.max()),
    )


@dataclass
class OverlapReport:
    """Score histograms by treatment group on shared bin edges."""

    bin_edges: np.ndarray
    treated_counts: np.ndarray
    control_counts: np.ndarray
    treated_range: tuple
    control_range: tuple

    def rows(self):
        return [
            (float(self.bin_edges[b]), float(self.bin_edges[b + 1]),
             int(self.treated_counts[b]), int(self.control_counts[b]))
            for b in range(self.treated_counts.shape[0])
        ]


def overlap_report(e, Z, n_bins=20) -> OverlapReport:
    """Equal-width score histograms over [0, max(e) * 1.0001]."""
    if int(n_bins) < 2:
        raise ValueError("n_bins must be at least 2")
    e = np.asarray(e, dtype=np.float64)
    Z = np.asarray(Z)
    edges = np.linspace(0.0, float(e.max()) * 1.0001, int(n_bins) + 1)
    treated = Z == 1
    t_counts, _ = np.histogram(e[treated], bins=edges)
    c_counts, _ = np.histogram(e[~treated], bins=edges)
    return OverlapReport(
        bin_edges=edges,
        treated_counts=t_counts,
        control_counts=c_counts,
        treated_range=(float(e[treated].min()), float(e[treated].max())),
        control_range=(float(e[~treated].min()), float(e[~treated].max())),
    )


@dataclass
class FalsificationResult:
    """One falsification run: full estimate plus its diagnostics."""

    att: AttEstimate
    balance: BalanceReport
    overlap: OverlapReport
    rank: int
    fictitious_index: int
    time_label: str = ""
    rank_table: object = None


def falsification_run(panel: PanelData, fictitious_T_index, rank=None,
                      r_max=8, n_bins=20) -> FalsificationResult:
    """Re-run the full analysis at a fictitious treatment date.

    ``fictitious_T_index`` indexes time points 1..T0+1; index T0+1 is the
    true date and reproduces the main estimate exactly. For earlier dates
    the pre-treatment block is re-standardized on the truncated window and
    the rank is re-selected by IC1 unless ``rank`` freezes it. The
    treatment roster is reused as-is.
    """
    idx = int(fictitious_T_index)
    t0 = panel.n_pre_periods
    if idx < 3:
        raise ValueError(
            f"fictitious index {idx} leaves fewer than 2 pre-treatment periods"
        )
    if idx > t0 + 1:
        raise ValueError(f"fictitious index {idx} exceeds the panel length {t0 + 1}")

    if idx == t0 + 1:
        y_pre, y_final = panel.Y_pre, panel.Y_final
        label = panel.time_labels[-1]
    else:
        # Standardizing the already-prepared slice equals standardizing the
        # raw returns on the truncated window (affine maps compose).
        y_pre, y_final = standardize_window(
            panel.Y_pre[: idx - 1], panel.Y_pre[idx - 1]
        )
        label = panel.time_labels[idx - 1]

    new_t0, n = y_pre.shape
    if rank is None:
        cap = min(int(r_max), min(new_t0, n) - 1)
        table = select_num_factors(y_pre, cap)
        chosen = table.r_ic1
    else:
        table = None
        chosen = int(rank)

    ffit = estimate_factors(y_pre, chosen)
    pfit = fit_logistic(ffit.Lambda_hat, panel.Z)
    att = estimate_att(y_final, panel.Z, ffit, pfit)
    return FalsificationResult(
        att=att,
        balance=balance_report(ffit, panel.Z, pfit.scores),
        overlap=overlap_report(pfit.scores, panel.Z, n_bins),
        rank=chosen,
        fictitious_index=idx,
        time_label=label,
        rank_table=table,
    )
