"""Tests for the team quality model and majority-vote accuracy."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genselect import (
    DiversityDominatedError,
    MonteCarloConfig,
    NoExploitableDiversityError,
    NoOracleAdvantageError,
    QualityDistribution,
    SelectorCurve,
    SelectorQualityWarning,
    Team,
    TeamStats,
    cjt_vote_accuracy,
    crossover_threshold,
    expected_quality,
    homogeneous_quality,
    marginal_gain,
    nonlinear_crossover,
    selector_quality_hat,
    team_mean,
    team_oracle,
    team_stats,
)

# E[max of two iid N(0,1)] = 1/sqrt(pi); classical order-statistic identity.
MAX2_NORMAL = 0.5641895835477563


def two_gaussian_team():
    return Team(
        (
            ("a", QualityDistribution.gaussian(0.0, 1.0)),
            ("b", QualityDistribution.gaussian(0.0, 1.0)),
        )
    )


def point_team(*values):
    return Team(
        tuple((f"m{i}", QualityDistribution.point(v)) for i, v in enumerate(values))
    )


class TestQualityDistribution:
    def test_point_mean_and_draw(self):
        d = QualityDistribution.point(0.72)
        assert d.mean == 0.72
        rng = np.random.default_rng(0)
        assert np.all(d.draw(rng, 5) == 0.72)

    def test_gaussian_mean(self):
        assert QualityDistribution.gaussian(0.5, 0.1).mean == 0.5

    def test_empirical_mean(self):
        d = QualityDistribution.empirical([0.2, 0.4, 0.9])
        assert d.mean == pytest.approx(0.5)

    def test_empirical_needs_samples(self):
        with pytest.raises(ValueError):
            QualityDistribution("empirical", samples=())

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            QualityDistribution.gaussian(0.0, -0.1)

    def test_point_with_scale_rejected(self):
        with pytest.raises(ValueError):
            QualityDistribution("point", location=0.5, scale=0.1)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            QualityDistribution("lognormal")

    def test_zero_scale_gaussian_is_point(self):
        assert QualityDistribution.gaussian(0.3, 0.0).is_point


class TestTeam:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            Team((("a", QualityDistribution.point(0.1)),) * 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Team(())

    def test_draw_pools_shape(self):
        pools = two_gaussian_team().draw_pools(np.random.default_rng(1), 100)
        assert pools.shape == (100, 2)


class TestTeamStatistics:
    def test_mean_is_average_of_agent_means(self):
        team = point_team(0.2, 0.4, 0.9)
        assert team_mean(team) == pytest.approx(0.5)

    def test_oracle_point_masses_analytic(self):
        est, se = team_oracle(point_team(0.2, 0.4, 0.9))
        assert est == 0.9
        assert se == 0.0

    def test_oracle_max_of_two_standard_normals(self):
        # Oracle of two iid N(0,1) agents is 1/sqrt(pi) ~ 0.5642.
        est, se = team_oracle(two_gaussian_team(), MonteCarloConfig(trials=400_000, seed=7))
        assert se > 0
        assert est == pytest.approx(MAX2_NORMAL, abs=4 * se)
        assert est == pytest.approx(MAX2_NORMAL, abs=0.01)

    def test_oracle_seed_reproducible(self):
        team = two_gaussian_team()
        mc = MonteCarloConfig(trials=10_000, seed=42)
        assert team_oracle(team, mc) == team_oracle(team, mc)

    def test_team_stats_gap(self):
        stats = team_stats(point_team(0.3, 0.7))
        assert stats.mean == pytest.approx(0.5)
        assert stats.oracle == pytest.approx(0.7)
        assert stats.gap == pytest.approx(0.2)

    def test_inconsistent_gap_rejected(self):
        with pytest.raises(ValueError):
            TeamStats(mean=0.5, oracle=0.7, gap=0.1)

    def test_oracle_below_mean_rejected(self):
        with pytest.raises(ValueError):
            TeamStats(mean=0.9, oracle=0.5, gap=-0.4, oracle_se=0.001)


class TestLinearModel:
    def test_endpoints(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert expected_quality(stats, 0.0) == pytest.approx(0.4)
        assert expected_quality(stats, 1.0) == pytest.approx(0.8)

    def test_midpoint(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert expected_quality(stats, 0.5) == pytest.approx(0.6)

    def test_s_out_of_range_rejected(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        with pytest.raises(ValueError):
            expected_quality(stats, 1.2)
        with pytest.raises(ValueError):
            expected_quality(stats, -0.01)

    @given(
        st.floats(0.0, 1.0),
        st.floats(-2.0, 2.0),
        st.floats(1e-6, 3.0),
    )
    @settings(max_examples=200)
    def test_monotone_in_s_and_bounded(self, s, mean, gap):
        stats = TeamStats(mean=mean, oracle=mean + gap)
        q = expected_quality(stats, s)
        assert stats.mean - 1e-9 <= q <= stats.oracle + 1e-9
        # Monotone: nudging s up never lowers expected quality.
        if s <= 0.999:
            assert expected_quality(stats, s + 0.001) >= q - 1e-12


class TestSelectorQualityHat:
    def test_basic_value(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert selector_quality_hat(0.55, stats) == pytest.approx(0.375)

    def test_no_diversity_raises(self):
        stats = TeamStats(mean=0.5, oracle=0.5)
        with pytest.raises(NoExploitableDiversityError):
            selector_quality_hat(0.5, stats)

    def test_out_of_band_warns_but_returns(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        with pytest.warns(SelectorQualityWarning):
            s_hat = selector_quality_hat(0.95, stats)
        assert s_hat == pytest.approx(1.375)

    def test_anti_selector_below_zero(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert selector_quality_hat(0.36, stats) == pytest.approx(-0.1)


class TestCrossoverThreshold:
    def test_basic_value(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert crossover_threshold(0.6, stats) == pytest.approx(0.5)

    def test_open_interval(self):
        # M < mu_best < O forces s* strictly inside (0, 1).
        stats = TeamStats(mean=0.43, oracle=0.79)
        s_star = crossover_threshold(0.634, stats)
        assert 0.0 < s_star < 1.0
        assert s_star == pytest.approx((0.634 - 0.43) / (0.79 - 0.43))

    def test_diversity_dominated(self):
        stats = TeamStats(mean=0.6, oracle=0.8)
        with pytest.raises(DiversityDominatedError):
            crossover_threshold(0.55, stats)

    def test_no_oracle_advantage(self):
        stats = TeamStats(mean=0.4, oracle=0.6)
        with pytest.raises(NoOracleAdvantageError):
            crossover_threshold(0.65, stats)

    @given(
        st.floats(-1.0, 1.0),
        st.floats(0.01, 2.0),
        st.floats(0.001, 0.999),
    )
    @settings(max_examples=200)
    def test_always_in_open_unit_interval(self, mean, gap, frac):
        stats = TeamStats(mean=mean, oracle=mean + gap)
        mu_best = mean + frac * gap
        if mu_best <= mean or mu_best >= mean + gap:  # float edge cases
            return
        s_star = crossover_threshold(mu_best, stats)
        assert 0.0 < s_star < 1.0


class TestSelectorCurve:
    def test_identity_roundtrip(self):
        curve = SelectorCurve.identity()
        assert curve(0.3) == pytest.approx(0.3)
        assert curve.inverse(0.3) == pytest.approx(0.3)

    def test_nonlinear_matches_closed_form(self):
        # g(s) = s^2 on a fine grid: inverse of ratio r is sqrt(r).
        curve = SelectorCurve.from_function(lambda s: s * s)
        stats = TeamStats(mean=0.4, oracle=0.8)
        s_star = nonlinear_crossover(0.6, stats, curve)
        assert s_star == pytest.approx(math.sqrt(0.5), abs=1e-3)

    def test_linear_curve_reduces_to_plain_threshold(self):
        stats = TeamStats(mean=0.4, oracle=0.8)
        assert nonlinear_crossover(0.6, stats, SelectorCurve.identity()) == pytest.approx(
            crossover_threshold(0.6, stats)
        )

    def test_decreasing_curve_rejected(self):
        with pytest.raises(ValueError):
            SelectorCurve([(0.0, 0.0), (0.5, 0.7), (1.0, 0.6)])

    def test_bad_endpoints_rejected(self):
        with pytest.raises(ValueError):
            SelectorCurve([(0.0, 0.1), (1.0, 1.0)])
        with pytest.raises(ValueError):
            SelectorCurve([(0.2, 0.0), (1.0, 1.0)])


class TestMarginalGain:
    def test_linear_combination(self):
        s3 = TeamStats(mean=0.5, oracle=0.7)
        s4 = TeamStats(mean=0.48, oracle=0.75)
        # delta = s*dO + (1-s)*dM = 0.6*0.05 + 0.4*(-0.02)
        assert marginal_gain(s3, s4, 0.6) == pytest.approx(0.022)

    def test_weak_selector_penalized_by_mean_drop(self):
        s3 = TeamStats(mean=0.5, oracle=0.7)
        s4 = TeamStats(mean=0.45, oracle=0.75)
        assert marginal_gain(s3, s4, 0.0) == pytest.approx(-0.05)
        assert marginal_gain(s3, s4, 1.0) == pytest.approx(0.05)

    def test_sign_flip_at_interior_s(self):
        s3 = TeamStats(mean=0.5, oracle=0.7)
        s4 = TeamStats(mean=0.45, oracle=0.75)
        # Gain crosses zero at s = dM/(dM - dO) sign-wise: here 0.5.
        assert marginal_gain(s3, s4, 0.5) == pytest.approx(0.0)
        assert marginal_gain(s3, s4, 0.49) < 0 < marginal_gain(s3, s4, 0.51)


class TestHomogeneous:
    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=100)
    def test_flat_in_s(self, mu, s):
        assert homogeneous_quality(mu, s) == mu

    def test_s_validated(self):
        with pytest.raises(ValueError):
            homogeneous_quality(0.5, 1.5)


class TestMajorityVoteAccuracy:
    def test_independent_matches_binomial_tail(self):
        # n=9, p=0.6, rho=0: P(majority correct) = sum_{k>=5} C(9,k) .6^k .4^(9-k)
        exact = sum(
            math.comb(9, k) * 0.6**k * 0.4 ** (9 - k) for k in range(5, 10)
        )
        assert exact == pytest.approx(0.73343232, abs=1e-9)
        acc = cjt_vote_accuracy(9, 0.6, 0.0, trials=400_000, seed=3)
        assert acc == pytest.approx(exact, abs=0.005)

    def test_full_correlation_collapses_to_p(self):
        # rho=1: the panel is one juror in disguise.
        acc = cjt_vote_accuracy(9, 0.6, 1.0, trials=400_000, seed=4)
        assert acc == pytest.approx(0.6, abs=0.005)

    def test_correlation_erodes_amplification(self):
        kw = dict(trials=200_000, seed=5)
        acc0 = cjt_vote_accuracy(9, 0.6, 0.0, **kw)
        acc_half = cjt_vote_accuracy(9, 0.6, 0.5, **kw)
        acc1 = cjt_vote_accuracy(9, 0.6, 1.0, **kw)
        assert acc0 > acc_half > acc1

    def test_mixture_interpolates_exactly(self):
        # Single-common-shock law: acc(rho) = rho*p + (1-rho)*acc(0).
        ind = sum(math.comb(9, k) * 0.6**k * 0.4 ** (9 - k) for k in range(5, 10))
        expected = 0.5 * 0.6 + 0.5 * ind
        acc = cjt_vote_accuracy(9, 0.6, 0.5, trials=400_000, seed=6)
        assert acc == pytest.approx(expected, abs=0.005)

    def test_even_n_rejected(self):
        with pytest.raises(ValueError):
            cjt_vote_accuracy(8, 0.6, 0.0)

    def test_degenerate_p_rejected(self):
        with pytest.raises(ValueError):
            cjt_vote_accuracy(9, 1.0, 0.0)
        with pytest.raises(ValueError):
            cjt_vote_accuracy(9, 0.0, 0.0)

    def test_rho_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            cjt_vote_accuracy(9, 0.6, 1.5)

    def test_seed_reproducible(self):
        a = cjt_vote_accuracy(5, 0.7, 0.3, trials=20_000, seed=11)
        b = cjt_vote_accuracy(5, 0.7, 0.3, trials=20_000, seed=11)
        assert a == b
