"""Command-line interface: estimate | simulate | balance | falsify.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Errors print a single machine-parsable line to stderr.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import active_backend
from .att import estimate_att
from .diagnostics import balance_report, falsification_run, overlap_report
from .exceptions import ConfigError, DataError, EstimationError
from .factors import estimate_factors, select_num_factors
from .io import RunConfig, load_panel, parse_config_file, write_csv, write_json
from .propensity import adjusted_beta_se, fit_logistic
from .simulation import SimScenario, monte_carlo, benchmark_scenario


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="factoripw",
        description="IPW treatment-effect estimation on panel data with "
                    "factor-loading propensity scores",
    )
    parser.add_argument("--version", action="version", version=f"factoripw {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--bins", type=int, help="score histogram bins (default 20)")

    def add_data(p):
        p.add_argument("--prices", help="wide CSV of prices (or returns)")
        p.add_argument("--roster", help="CSV with columns unit_id, treated")
        p.add_argument("--treatment-time", dest="treatment_time",
                       help="ISO date of the treatment period")
        p.add_argument("--input-kind", dest="input_kind", choices=("prices", "returns"))
        p.add_argument("--rank", type=int, help="fix the number of factors")
        p.add_argument("--rank-max", dest="rank_max", type=int,
                       help="max rank for IC selection (default 8)")

    p_est = sub.add_parser("estimate", help="full three-step estimate with diagnostics")
    add_common(p_est)
    add_data(p_est)

    p_bal = sub.add_parser("balance", help="balance and overlap diagnostics only")
    add_common(p_bal)
    add_data(p_bal)

    p_fal = sub.add_parser("falsify", help="falsification tests at fictitious dates")
    add_common(p_fal)
    add_data(p_fal)
    p_fal.add_argument("--dates", dest="falsify_dates",
                       help="comma-separated fictitious treatment dates")
    p_fal.add_argument("--freeze-rank", dest="freeze_rank", type=int,
                       help="reuse this rank instead of re-selecting per date")

    p_sim = sub.add_parser("simulate", help="Monte Carlo benchmark scenarios")
    add_common(p_sim)
    p_sim.add_argument("--case", type=int, choices=(1, 2))
    p_sim.add_argument("--scenario", type=int, choices=(1, 2, 3, 4))
    p_sim.add_argument("--beta", help="4 comma-separated logistic coefficients")
    p_sim.add_argument("--n-rep", dest="n_rep", type=int)
    p_sim.add_argument("--fixed-design", dest="fixed_design", action="store_true",
                       default=None)
    return parser


def _merge_config(args):
    values = {}
    if args.config:
        if not Path(args.config).is_file():
            raise ConfigError(f"config file not found: {args.config}")
        values.update(parse_config_file(args.config))
    for key, val in vars(args).items():
        if key in ("config",) or val is None:
            continue
        if key == "falsify_dates" and isinstance(val, str):
            val = tuple(d.strip() for d in val.split(",") if d.strip())
        if key == "beta" and isinstance(val, str):
            val = tuple(float(b) for b in val.split(","))
        values[key] = val
    if "falsify_dates" in values and not isinstance(values["falsify_dates"], tuple):
        values["falsify_dates"] = tuple(values["falsify_dates"])
    allowed = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values)


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit_chain(cfg, panel):
    """Shared rank-selection + factor + logistic steps."""
    limit = min(panel.n_pre_periods, panel.n_units) - 1
    if cfg.rank:
        if cfg.rank > limit:
            raise ConfigError(f"rank {cfg.rank} exceeds panel limit {limit}")
        ic = None
        rank = cfg.rank
    else:
        ic = select_num_factors(panel.Y_pre, min(cfg.rank_max, limit))
        rank = ic.r_ic1
    ffit = estimate_factors(panel.Y_pre, rank)
    pfit = fit_logistic(ffit.Lambda_hat, panel.Z)
    return ic, ffit, pfit


def _write_diag_files(out, prefix, balance, overlap):
    write_csv(out / f"{prefix}balance.csv",
              ["loading", "asd_unweighted", "asd_weighted", "flagged"],
              [(j + 1, u, w, int(f)) for j, u, w, f in balance.rows()])
    write_csv(out / f"{prefix}overlap.csv",
              ["bin_low", "bin_high", "treated_count", "control_count"],
              overlap.rows())


def cmd_estimate(cfg: RunConfig) -> int:
    panel = load_panel(cfg.prices, cfg.roster, cfg.treatment_time, cfg.input_kind)
    ic, ffit, pfit = _fit_chain(cfg, panel)
    att = estimate_att(panel.Y_final, panel.Z, ffit, pfit)
    beta_se = adjusted_beta_se(pfit, ffit)
    balance = balance_report(ffit, panel.Z, pfit.scores)
    overlap = overlap_report(pfit.scores, panel.Z, cfg.bins)

    out = _outdir(cfg)
    report = {
        "backend": active_backend(),
        "n_units": panel.n_units,
        "n_treated": int(panel.Z.sum()),
        "n_pre_periods": panel.n_pre_periods,
        "treatment_time": cfg.treatment_time,
        "rank": ffit.rank,
        "rank_policy": "fixed" if cfg.rank else "ic_select",
        "eigenvalues": ffit.eigenvalues,
        "eigengap_warning": ffit.eigengap_warning,
        "beta": pfit.beta,
        "beta_se_adjusted": beta_se,
        "logistic_iterations": pfit.iterations,
        "loglik": pfit.loglik,
        "att": {
            "tau1": att.tau1,
            "tau0": att.tau0,
            "tau_att": att.tau_att,
            "variance": att.variance,
            "se": att.se,
            "ci_low": att.ci_low,
            "ci_high": att.ci_high,
            "p_value": att.p_value,
            "eta1": att.eta1,
            "eta2": att.eta2,
        },
        "balance": [
            {"loading": j + 1, "asd_unweighted": u, "asd_weighted": w, "flagged": f}
            for j, u, w, f in balance.rows()
        ],
        "max_asd_weighted": balance.max_asd_weighted,
        "asd_threshold": balance.threshold,
    }
    if ic is not None:
        report["ic_table"] = {
            "rank": ic.ranks, "v": ic.v, "ic1": ic.ic1, "ic2": ic.ic2,
            "r_ic1": ic.r_ic1, "r_ic2": ic.r_ic2,
        }
        write_csv(out / "ic_table.csv", ["rank", "v", "ic1", "ic2"], ic.rows())
    write_json(out / "estimate.json", report)
    weights = np.where(panel.Z == 1, 1.0, pfit.scores / (1.0 - pfit.scores))
    write_csv(out / "units.csv",
              ["unit_id", "treated", "score", "weight", "influence"],
              [(uid, int(z), float(s), float(w), float(i))
               for uid, z, s, w, i in zip(panel.unit_ids, panel.Z, pfit.scores,
                                          weights, att.influence)])
    _write_diag_files(out, "", balance, overlap)
    return 0


def cmd_balance(cfg: RunConfig) -> int:
    panel = load_panel(cfg.prices, cfg.roster, cfg.treatment_time, cfg.input_kind)
    ic, ffit, pfit = _fit_chain(cfg, panel)
    balance = balance_report(ffit, panel.Z, pfit.scores)
    overlap = overlap_report(pfit.scores, panel.Z, cfg.bins)
    out = _outdir(cfg)
    _write_diag_files(out, "", balance, overlap)
    write_json(out / "balance.json", {
        "rank": ffit.rank,
        "rank_policy": "fixed" if cfg.rank else "ic_select",
        "max_asd_weighted": balance.max_asd_weighted,
        "flagged": [j + 1 for j, _, _, f in balance.rows() if f],
    })
    return 0


def cmd_falsify(cfg: RunConfig) -> int:
    panel = load_panel(cfg.prices, cfg.roster, cfg.treatment_time, cfg.input_kind)
    out = _outdir(cfg)
    rows = []
    for label in cfg.falsify_dates:
        if label not in panel.time_labels:
            raise DataError(f"falsification date {label!r} not found among the panel dates")
        idx = panel.time_labels.index(label) + 1
        res = falsification_run(
            panel, idx,
            rank=cfg.freeze_rank or None,
            r_max=cfg.rank_max,
            n_bins=cfg.bins,
        )
        rows.append((label, res.rank, res.att.tau_att, res.att.se, res.att.p_value))
        _write_diag_files(out, f"falsify_{label}_", res.balance, res.overlap)
    write_csv(out / "falsification.csv",
              ["date", "rank", "att", "se", "p_value"], rows)
    write_json(out / "falsification.json", {
        "dates": [
            {"date": d, "rank": r, "att": a, "se": s, "p_value": p}
            for d, r, a, s, p in rows
        ],
        "rank_policy": "frozen" if cfg.freeze_rank else "ic_select",
    })
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.beta:
        scn = SimScenario(case=cfg.case, beta=tuple(cfg.beta), n_rep=cfg.n_rep,
                          seed=cfg.seed, n_units=cfg.n_units, n_periods=cfg.n_periods,
                          fixed_design=cfg.fixed_design)
    else:
        scn = benchmark_scenario(cfg.case, cfg.scenario, n_rep=cfg.n_rep, seed=cfg.seed,
                             n_units=cfg.n_units, n_periods=cfg.n_periods,
                             fixed_design=cfg.fixed_design)
    result = monte_carlo(scn)
    out = _outdir(cfg)
    rows = []
    for rec in result.records:
        rows.append((
            rec.k, int(rec.ok), rec.reason, rec.tau_hat, rec.se, int(rec.covered),
            rec.ci_low, rec.ci_high, rec.n_treated,
            *[float(b) for b in rec.beta_hat], rec.loading_msse,
            *[float(a) for a in rec.asd_unweighted],
            *[float(a) for a in rec.asd_weighted],
        ))
    write_csv(out / "replications.csv",
              ["k", "ok", "reason", "tau_hat", "se", "covered", "ci_low", "ci_high",
               "n_treated", "beta0_hat", "beta1_hat", "beta2_hat", "beta3_hat",
               "loading_msse", "asd_u1", "asd_u2", "asd_u3",
               "asd_w1", "asd_w2", "asd_w3"],
              rows)
    summary = result.summary_row()
    summary["seed"] = scn.seed
    summary["backend"] = active_backend()
    write_json(out / "summary.json", summary)
    write_csv(out / "summary.csv", list(summary), [list(summary.values())])
    return 0


_DISPATCH = {
    "estimate": cmd_estimate,
    "balance": cmd_balance,
    "falsify": cmd_falsify,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return _DISPATCH[cfg.mode](cfg)
    except (ConfigError, ValueError) as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3
    except (EstimationError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"error: numerical: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
