"""File ingestion, run configuration and report emission.

Prices arrive as a wide CSV (first column ISO dates, one column per unit);
the treatment roster is a two-column CSV (unit_id, treated). Dates are
labels only; all engine logic runs on indices. Reports go out as UTF-8
CSV plus one JSON summary per run, full precision, locale independent.
"""

import csv
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError
from .panel import PanelData, prepare_returns, standardize_window

MODES = ("estimate", "simulate", "balance", "falsify")


def _parse_cell(raw, row, col):
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"unparsable cell at data row {row}, column {col}: {raw!r}")


def _read_wide_csv(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    header = [cell.strip() for cell in rows[0]]
    unit_ids = header[1:]
    if len(set(unit_ids)) != len(unit_ids):
        dupes = sorted({u for u in unit_ids if unit_ids.count(u) > 1})
        raise DataError(f"{path}: duplicate unit ids {dupes}")
    dates = []
    values = np.empty((len(rows) - 1, len(unit_ids)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"{path}: data row {i} has {len(row)} cells, expected {len(header)}")
        label = row[0].strip()
        try:
            date.fromisoformat(label)
        except ValueError:
            raise DataError(f"{path}: first column must be ISO-8601 dates, got {label!r}")
        dates.append(label)
        for j, cell in enumerate(row[1:]):
            if cell.strip() == "":
                raise DataError(f"{path}: missing cell at data row {i}, column {header[j + 1]}")
            values[i, j] = _parse_cell(cell.strip(), i, header[j + 1])
    if any(dates[i] >= dates[i + 1] for i in range(len(dates) - 1)):
        raise DataError(f"{path}: dates must be strictly increasing")
    return dates, unit_ids, values


def _read_roster(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                {"unit_id", "treated"} - {f.strip() for f in reader.fieldnames}:
            raise DataError(f"{path}: roster needs columns unit_id, treated")
        roster = {}
        for i, row in enumerate(reader):
            uid = row["unit_id"].strip()
            flag = row["treated"].strip()
            if flag not in ("0", "1"):
                raise DataError(f"{path}: treated must be 0/1 at row {i}, got {flag!r}")
            if uid in roster:
                raise DataError(f"{path}: duplicate roster unit {uid!r}")
            roster[uid] = int(flag)
    return roster


def load_panel(prices_path, roster_path, treatment_time, input_kind="prices"):
    """Build a PanelData from a wide price (or return) CSV plus a roster.

    The row labelled ``treatment_time`` becomes the final period; rows after
    it are dropped. With ``input_kind='returns'`` the file already holds
    returns and only the pre-window standardization is applied.
    """
    if input_kind not in ("prices", "returns"):
        raise ConfigError(f"input_kind must be 'prices' or 'returns', got {input_kind!r}")
    dates, unit_ids, values = _read_wide_csv(prices_path)
    roster = _read_roster(roster_path)
    missing = [u for u in unit_ids if u not in roster]
    if missing:
        raise DataError(f"units missing from the roster: {missing}")
    Z = np.array([roster[u] for u in unit_ids])

    if treatment_time not in dates:
        raise DataError(f"treatment_time {treatment_time!r} not found among the dates")
    cut = dates.index(treatment_time)
    if input_kind == "prices":
        if cut < 3:
            raise DataError("need at least 3 price rows before the treatment date")
        outcomes = prepare_returns(values[: cut + 1])
        labels = dates[1: cut + 1]
    else:
        if cut < 2:
            raise DataError("need at least 2 return rows before the treatment date")
        pre, final = standardize_window(values[:cut], values[cut])
        outcomes = np.vstack([pre, final])
        labels = dates[: cut + 1]
    return PanelData(
        Y_pre=outcomes[:-1],
        Y_final=outcomes[-1],
        Z=Z,
        unit_ids=list(unit_ids),
        time_labels=list(labels),
    )


def emit_panel(panel: PanelData, returns_path, roster_path):
    """Write a panel back to disk in returns form (round-trips via
    ``load_panel(..., input_kind='returns')``)."""
    with Path(returns_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(panel.unit_ids))
        block = np.vstack([panel.Y_pre, panel.Y_final])
        for label, row in zip(panel.time_labels, block):
            writer.writerow([label] + [repr(float(v)) for v in row])
    with Path(roster_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "treated"])
        for uid, flag in zip(panel.unit_ids, panel.Z):
            writer.writerow([uid, int(flag)])


@dataclass
class RunConfig:
    """Validated run configuration (config file merged with CLI flags)."""

    mode: str
    prices: str = ""
    roster: str = ""
    treatment_time: str = ""
    input_kind: str = "prices"
    rank: int = 0              # fixed rank; 0 means IC selection
    rank_max: int = 8
    seed: int = 0
    bins: int = 20
    out: str = "."
    falsify_dates: tuple = ()
    freeze_rank: int = 0
    fixed_design: bool = False
    case: int = 1
    scenario: int = 0          # 1..4 picks a benchmark beta row
    beta: tuple = ()
    n_rep: int = 1000
    n_units: int = 500
    n_periods: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rank < 0 or self.rank_max < 1:
            raise ConfigError("rank must be >= 1 when fixed, rank_max >= 1")
        if self.bins < 2:
            raise ConfigError("bins must be at least 2")
        if self.mode in ("estimate", "balance", "falsify"):
            for name in ("prices", "roster", "treatment_time"):
                if not getattr(self, name):
                    raise ConfigError(f"mode {self.mode} requires {name}")
            for name in ("prices", "roster"):
                if not Path(getattr(self, name)).is_file():
                    raise ConfigError(f"{name} path does not exist: {getattr(self, name)}")
        if self.mode == "falsify" and not self.falsify_dates:
            raise ConfigError("falsify mode requires falsify_dates")
        if self.mode == "simulate":
            if not self.beta and not 1 <= self.scenario <= 4:
                raise ConfigError("simulate mode requires scenario in 1..4 or an explicit beta")
            if self.beta and len(self.beta) != 4:
                raise ConfigError("beta must have 4 entries (intercept plus 3 loadings)")


_BOOL_KEYS = {"fixed_design"}
_INT_KEYS = {"rank", "rank_max", "seed", "bins", "freeze_rank", "case",
             "scenario", "n_rep", "n_units", "n_periods"}
_TUPLE_KEYS = {"falsify_dates", "beta"}


def parse_config_file(path):
    """Parse the flat ``key = value`` config format into a dict.

    Lines starting with '#' are comments; list values are comma separated.
    """
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _BOOL_KEYS:
            if value.lower() not in ("true", "false", "0", "1"):
                raise ConfigError(f"{path}:{lineno}: {key} must be true/false")
            out[key] = value.lower() in ("true", "1")
        elif key in _INT_KEYS:
            try:
                out[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer")
        elif key in _TUPLE_KEYS:
            items = tuple(v.strip() for v in value.split(",") if v.strip())
            out[key] = tuple(float(v) for v in items) if key == "beta" else items
        else:
            out[key] = value
    return out


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
