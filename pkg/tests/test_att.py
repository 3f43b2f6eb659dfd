"""Hajek ATT point estimate, influence contributions and sandwich variance."""

import numpy as np
import pytest

from factoripw import (
    EstimandUndefinedError,
    OverlapError,
    att_variance,
    estimate_att,
    estimate_factors,
    fit_logistic,
    hajek_att,
    influence_contributions,
)
from factoripw import simulation as sim
from factoripw.att import _assemble_influence
from factoripw.factors import FactorFit
from factoripw.propensity import information_matrix

# 4-unit hand example: Z=(1,1,0,0), Y=(3,5,2,4), e=(.5,.5,.2,.8)
HAND_Y = np.array([3.0, 5.0, 2.0, 4.0])
HAND_Z = np.array([1, 1, 0, 0])
HAND_E = np.array([0.5, 0.5, 0.2, 0.8])
HAND_TAU0 = 66.0 / 17.0        # (2*0.25 + 4*4) / 4.25
HAND_TAU = 2.0 / 17.0


class TestHajek:
    def test_hand_example(self):
        tau1, tau0, tau = hajek_att(HAND_Y, HAND_Z, HAND_E)
        assert tau1 == pytest.approx(4.0, abs=1e-15)
        assert tau0 == pytest.approx(HAND_TAU0, abs=1e-12)
        assert tau == pytest.approx(HAND_TAU, abs=1e-12)

    def test_constant_scores_give_unweighted_control_mean(self):
        _, tau0, _ = hajek_att(HAND_Y, HAND_Z, np.full(4, 0.3))
        assert tau0 == pytest.approx(3.0, abs=1e-14)

    def test_invariant_to_scaling_control_odds(self):
        # scaling all control odds by c > 0 leaves tau0 unchanged
        for c in (0.1, 3.0, 250.0):
            odds = c * HAND_E / (1 - HAND_E)
            e_scaled = odds / (1 + odds)
            _, tau0, _ = hajek_att(HAND_Y, HAND_Z, e_scaled)
            assert tau0 == pytest.approx(HAND_TAU0, abs=1e-12)

    def test_requires_both_groups(self):
        with pytest.raises(EstimandUndefinedError):
            hajek_att(HAND_Y, np.ones(4), HAND_E)
        with pytest.raises(EstimandUndefinedError):
            hajek_att(HAND_Y, np.zeros(4), HAND_E)

    def test_overlap_violation_names_units(self):
        bad = HAND_E.copy()
        bad[2] = 1.0
        with pytest.raises(OverlapError, match=r"\[2\]"):
            hajek_att(HAND_Y, HAND_Z, bad)


class TestInfluence:
    def test_hand_example_with_score_terms_zeroed(self):
        # with the score and loading-noise arrays forced to zero the
        # contributions reduce to U1/eta1 + U0/eta2:
        # eta1 = 1/2, eta2 = -17/16, controls get +-128/289
        X = np.column_stack([np.ones(4), np.array([0.1, -0.2, 0.3, -0.4])])
        influence, eta1, eta2, _ = _assemble_influence(
            HAND_Y, HAND_Z, HAND_E, X, np.zeros((4, 2)), np.zeros((4, 2)),
            information_matrix(np.zeros(2), X), 4.0, HAND_TAU0,
        )
        assert eta1 == pytest.approx(0.5, abs=1e-15)
        assert eta2 == pytest.approx(-17.0 / 16.0, abs=1e-15)
        expected = np.array([-2.0, 2.0, 128.0 / 289.0, -128.0 / 289.0])
        np.testing.assert_allclose(influence, expected, atol=1e-12)

    def test_no_generated_regressor_collapse(self):
        # zero residuals kill the correction; an exactly-fitted score makes
        # the remaining term the score projection alone
        rng = np.random.default_rng(0)
        t0, n, r = 25, 60, 2
        F = np.linalg.qr(rng.normal(size=(t0, r)))[0] * np.sqrt(t0)
        lam = rng.normal(size=(n, r))
        z = (rng.random(n) < 0.35).astype(int)
        pfit = fit_logistic(lam, z)
        ffit = FactorFit(F_hat=F, Lambda_hat=lam, residuals=np.zeros((t0, n)),
                         rank=r, eigenvalues=np.array([2.0, 1.0]))
        y = rng.normal(size=n)
        tau1, tau0, _ = hajek_att(y, z, pfit.scores)
        got = influence_contributions(y, z, ffit, pfit, tau1, tau0)
        S = pfit.design * (z - pfit.scores)[:, None]
        expected, _, _, _ = _assemble_influence(
            y, z, pfit.scores, pfit.design, S, np.zeros_like(S),
            pfit.info_matrix, tau1, tau0,
        )
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_plug_in_focs_sum_to_zero(self):
        rec_rng = np.random.default_rng(1)
        for k in range(5):
            rng = np.random.default_rng([31, k])
            F = sim.simulate_factors(60, 3, 0.5, rng)
            lam, _ = sim.simulate_loadings(200, 1, rng)
            z = sim.assign_treatment(lam, (-1.5, 0.3, 0.3, 0.3), rng)
            y_pre, y_final = sim.simulate_outcomes(lam, F, z, 2.0, rng)
            ffit = estimate_factors(y_pre, 3)
            pfit = fit_logistic(ffit.Lambda_hat, z)
            est = estimate_att(y_final, z, ffit, pfit)
            n = 200
            u1 = z * (y_final - est.tau1)
            odds = pfit.scores / (1 - pfit.scores)
            u0 = (1 - z) * odds * (y_final - est.tau0)
            assert abs(np.sum(u1)) < 1e-8 * n
            assert abs(np.sum(u0)) < 1e-8 * n
            assert abs(np.sum(u1 / est.eta1 + u0 / est.eta2)) < 1e-8 * n

    def test_eta2_negative_and_variance_nonnegative(self):
        for k in range(10):
            rng = np.random.default_rng([57, k])
            F = sim.simulate_factors(40, 2, 0.5, rng)
            lam = rng.normal(size=(120, 2))
            z = (rng.random(120) < 0.25).astype(int)
            y = rng.normal(size=120)
            ffit = estimate_factors(F[:-1] @ lam.T + rng.normal(size=(39, 120)), 2)
            pfit = fit_logistic(ffit.Lambda_hat, z)
            est = estimate_att(y, z, ffit, pfit)
            assert est.eta2 < 0
            assert 0 < est.eta1 < 1
            assert est.variance >= 0


class TestAttVariance:
    def test_zero_influence_degenerate(self):
        var, se, ci, p = att_variance(1.5, np.zeros(10))
        assert var == 0.0
        assert se == 0.0
        assert ci == (1.5, 1.5)
        assert p == 0.0

    def test_formulas(self):
        infl = np.array([3.0, -1.0, 2.0])
        var, se, ci, p = att_variance(0.5, infl)
        assert var == pytest.approx(14.0 / 9.0, rel=1e-15)
        assert se == pytest.approx(np.sqrt(14.0) / 3.0, rel=1e-15)
        assert ci[0] == pytest.approx(0.5 - 1.96 * se, rel=1e-15)
        assert ci[1] == pytest.approx(0.5 + 1.96 * se, rel=1e-15)
        # two-sided normal p-value against an erfc oracle
        from math import erfc, sqrt
        assert p == pytest.approx(erfc(abs(0.5 / se) / sqrt(2)), rel=1e-15)

    def test_p_value_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            infl = rng.normal(size=20) * 10
            _, _, _, p = att_variance(rng.normal(), infl)
            assert 0.0 <= p <= 1.0


def _known_propensity_sandwich(y, z, lam_true, beta_true):
    """Lunceford-Davidian style oracle: logistic fit on the true loadings,
    influence assembled without any loading-noise correction."""
    pfit = fit_logistic(lam_true, z)
    tau1, tau0, tau = hajek_att(y, z, pfit.scores)
    S = pfit.design * (z - pfit.scores)[:, None]
    infl, _, _, _ = _assemble_influence(
        y, z, pfit.scores, pfit.design, S, np.zeros_like(S),
        pfit.info_matrix, tau1, tau0,
    )
    return att_variance(tau, infl)[0]


def test_correction_vanishes_for_long_panels():
    # with T0 = 400 the loading-noise part is negligible: the full variance
    # tracks the known-covariate sandwich on the true loadings within 5%
    full, oracle = [], []
    for k in range(200):
        rng = np.random.default_rng([404, k])
        F = sim.simulate_factors(401, 3, 0.5, rng)
        lam, _ = sim.simulate_loadings(500, 1, rng)
        z = sim.assign_treatment(lam, (-1.75, 0.05, 0.05, 0.05), rng)
        y_pre, y_final = sim.simulate_outcomes(lam, F, z, 2.0, rng)
        ffit = estimate_factors(y_pre, 3)
        pfit = fit_logistic(ffit.Lambda_hat, z)
        est = estimate_att(y_final, z, ffit, pfit)
        full.append(est.variance)
        oracle.append(_known_propensity_sandwich(y_final, z, lam, None))
    ratio = np.mean(full) / np.mean(oracle)
    assert abs(ratio - 1.0) < 0.05
