"""Shared fixtures: synthetic application-shaped CSVs and cached Monte
Carlo runs for the acceptance suite."""

import csv
from pathlib import Path

import numpy as np
import pytest

from factoripw import monte_carlo, benchmark_scenario
from factoripw import simulation as sim

MC_SEED = 20260811
MC_N_REP = 500

# quarterly closes from 1998Q2 through 2016Q1: 72 price dates
QUARTER_ENDS = []
for year in range(1998, 2017):
    for month, day in ((3, 31), (6, 30), (9, 30), (12, 31)):
        if (year, month) < (1998, 6) or (year, month) > (2016, 3):
            continue
        QUARTER_ENDS.append(f"{year:04d}-{month:02d}-{day:02d}")
TREATMENT_DATE = QUARTER_ENDS[-1]


def build_application_fixture(directory, n_units=224, seed=10):
    """Write a synthetic quarterly price panel + roster shaped like the
    green-bond application (224 units, 29 treated at the found seed)."""
    rng = np.random.default_rng([909, seed])
    n_dates = len(QUARTER_ENDS)
    F = sim.simulate_factors(n_dates - 1, 3, 0.5, rng)
    lam, _ = sim.simulate_loadings(n_units, 1, rng)
    Z = sim.assign_treatment(lam, (-2.1, 0.4, 0.6, 0.9), rng)
    returns = 0.05 * (F @ lam.T + rng.normal(size=(n_dates - 1, n_units)))
    prices = 100.0 * np.exp(np.vstack([np.zeros(n_units), np.cumsum(returns, axis=0)]))

    directory = Path(directory)
    prices_path = directory / "prices.csv"
    roster_path = directory / "roster.csv"
    unit_ids = [f"u{i:03d}" for i in range(n_units)]
    with prices_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + unit_ids)
        for label, row in zip(QUARTER_ENDS, prices):
            writer.writerow([label] + [repr(float(v)) for v in row])
    with roster_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "treated"])
        for uid, flag in zip(unit_ids, Z):
            writer.writerow([uid, int(flag)])
    return prices_path, roster_path, int(Z.sum())


@pytest.fixture(scope="session")
def application_csvs(tmp_path_factory):
    directory = tmp_path_factory.mktemp("app_fixture")
    prices, roster, n_treated = build_application_fixture(directory)
    assert n_treated == 29
    return prices, roster


@pytest.fixture(scope="session")
def benchmark_mc():
    """Monte Carlo results for all 8 benchmark scenarios at n_rep=500."""
    results = {}
    for case in (1, 2):
        for scenario in (1, 2, 3, 4):
            results[(case, scenario)] = monte_carlo(
                benchmark_scenario(case, scenario, n_rep=MC_N_REP, seed=MC_SEED)
            )
    return results
