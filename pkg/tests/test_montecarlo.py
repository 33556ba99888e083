"""
Tests for Monte Carlo campaigns, the binomial sampler and the exhaustive MSE oracle.
"""
import math

import numpy as np
import pandas as pd
import pydantic
import pytest
from scipy import stats

from bounds import ziv_zakai_closed, ziv_zakai_exact
from errors import OracleRangeError
from likelihood import binomial_log_pmf
from montecarlo import (BLOCK_SIZE, RECORD_COLUMNS, block_stream, mse_oracle_exact,
                        mse_oracle_prior_averaged, replay_trial, run_campaign, sample_tally)
from probe_model import outcome_probability
from schemas import CampaignConfig, EstimatorMethod, PhiPolicy, PriorWindow, ProbeSpec


@pytest.fixture
def probe():
    return ProbeSpec(nu=0.1, nbar=1.0)


def fig1_config(fig1, **overrides):
    probe, prior, m = fig1
    fields = dict(probe=probe, prior=prior, m=m, trials=10_000, phi=1e-4, master_seed=20240601)
    fields.update(overrides)
    return CampaignConfig(**fields)


class TestSampler:

    def test_zero_phase_is_symmetric(self, probe):
        m = 1000
        k = sample_tally(probe, np.zeros(100_000), m, block_stream(11, 0))
        stderr = math.sqrt(m * 0.25 / k.size)
        assert abs(k.mean() - m / 2) < 4 * stderr

    def test_mean_tally(self, probe):
        m = 1_000_000
        k = sample_tally(probe, np.full(10_000, 1e-4), m, block_stream(5, 3))
        p = outcome_probability(probe, 1e-4, '+')
        stderr = math.sqrt(m * p * (1 - p) / k.size)
        assert abs(k.mean() - m * p) < 4 * stderr
        assert m * p == pytest.approx(500995, abs=0.1)

    def test_matches_binomial_pmf(self, probe):
        m, draws = 20, 1_000_000
        phi = 2e-3
        k = sample_tally(probe, np.full(draws, phi), m, block_stream(123, 0))
        observed = np.bincount(k, minlength=m + 1).astype(float)
        expected = draws * np.exp(binomial_log_pmf(np.arange(m + 1), m, outcome_probability(probe, phi, '+')))
        # pool sparse tails so every expected count is at least 5
        observed = np.concatenate([[observed[:3].sum()], observed[3:18], [observed[18:].sum()]])
        expected = np.concatenate([[expected[:3].sum()], expected[3:18], [expected[18:].sum()]])
        expected *= observed.sum() / expected.sum()
        assert stats.chisquare(observed, expected).pvalue > 1e-3

    def test_substreams_differ(self):
        a = block_stream(7, 0).random(4)
        b = block_stream(7, 1).random(4)
        c = block_stream(8, 0).random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        np.testing.assert_array_equal(a, block_stream(7, 0).random(4))


class TestCampaign:

    def test_first_scenario_rmse(self, fig1):
        records, summary = run_campaign(fig1_config(fig1))
        assert list(records.columns) == RECORD_COLUMNS
        assert len(records) == 10_000
        assert abs(summary.rmse - 5e-5) < 3 * summary.rmse_stderr
        assert 4.85e-5 <= summary.rmse <= 5.15e-5

    def test_first_scenario_unbiased(self, fig1):
        _, summary = run_campaign(fig1_config(fig1, method=EstimatorMethod.EXACT_ARCSIN))
        assert abs(summary.bias) < 3 * summary.bias_stderr

    def test_prior_sampling_saturates_cramer_rao(self, fig1):
        config = fig1_config(fig1, phi=None, phi_policy=PhiPolicy.PRIOR, method=EstimatorMethod.EXACT_ARCSIN)
        records, summary = run_campaign(config)
        assert records['phi_true'].between(0.0, 1e-3).all()
        cr = summary.rmse / summary.comparisons['cr']
        assert abs(summary.rmse - cr) < 3 * summary.rmse_stderr

    def test_second_scenario_near_strong_limit(self, fig2):
        probe, prior, m = fig2
        config = CampaignConfig(probe=probe, prior=prior, m=m, trials=10_000, phi=1e-4,
                                master_seed=20240601, method=EstimatorMethod.EXACT_ARCSIN)
        _, summary = run_campaign(config)
        assert 1.7 <= summary.comparisons['strong'] <= 2.1
        assert abs(summary.bias) < 3 * summary.bias_stderr

    @pytest.mark.parametrize("policy", list(PhiPolicy))
    def test_never_significantly_below_ziv_zakai(self, fig1, policy):
        probe, prior, m = fig1
        phi = 1e-4 if policy == PhiPolicy.FIXED else None
        _, summary = run_campaign(fig1_config(fig1, phi=phi, phi_policy=policy))
        zz = ziv_zakai_closed(probe, m)
        assert summary.rmse >= zz * (1 - 3 * summary.rmse_stderr / summary.rmse)

    def test_comparison_ratios(self, fig1):
        _, summary = run_campaign(fig1_config(fig1, trials=100))
        assert summary.comparisons['weak'] == pytest.approx(summary.rmse / 1e-3)
        assert summary.comparisons['strong'] == pytest.approx(summary.rmse / 1e-6)
        assert summary.comparisons['W'] == pytest.approx(summary.rmse / 1e-3)

    def test_single_trial(self, fig1):
        records, summary = run_campaign(fig1_config(fig1, trials=1, master_seed=99))
        assert summary.mse == records['error'].iloc[0]**2
        assert summary.mse_stderr == 0.0

    def test_independent_of_worker_count(self, fig1):
        config = fig1_config(fig1, trials=3 * BLOCK_SIZE + 17)
        serial, _ = run_campaign(config)
        parallel, _ = run_campaign(config.model_copy(update={'workers': 4}))
        pd.testing.assert_frame_equal(serial, parallel)
        assert serial['index'].tolist() == list(range(config.trials))

    def test_same_seed_same_records(self, fig1):
        first, _ = run_campaign(fig1_config(fig1, trials=500))
        second, _ = run_campaign(fig1_config(fig1, trials=500))
        pd.testing.assert_frame_equal(first, second)
        other, _ = run_campaign(fig1_config(fig1, trials=500, master_seed=1))
        assert not first['k'].equals(other['k'])

    def test_replay_trial(self, fig1):
        config = fig1_config(fig1, trials=BLOCK_SIZE + 100)
        records, _ = run_campaign(config)
        index = BLOCK_SIZE + 42
        record = replay_trial(config, index)
        row = records.iloc[index]
        assert record.k == row['k']
        assert record.phi_hat == row['phi_hat']

    def test_replay_out_of_range(self, fig1):
        with pytest.raises(ValueError, match="outside"):
            replay_trial(fig1_config(fig1, trials=10), 10)

    def test_clamp_warning(self, probe):
        config = CampaignConfig(probe=probe, prior=PriorWindow(width=1e-3), m=10, trials=1000, phi=1e-4,
                                method=EstimatorMethod.EXACT_ARCSIN)
        records, summary = run_campaign(config)
        assert summary.clamp_warning
        assert summary.clamp_fraction == pytest.approx(records['clamped'].mean())

    @pytest.mark.parametrize("overrides,message", [
        ({'trials': 0}, "trials must be at least 1"),
        ({'phi': None}, "needs a phase"),
        ({'phi': 2e-3}, "outside prior window"),
        ({'master_seed': -1}, "64-bit"),
    ])
    def test_config_validation(self, fig1, overrides, message):
        with pytest.raises(pydantic.ValidationError, match=message):
            fig1_config(fig1, **overrides)


class TestOracle:

    def test_single_shot(self, probe):
        assert mse_oracle_exact(probe, 0.0, 1) == pytest.approx(probe.nu**2 / (4 * probe.nbar**2), rel=1e-12)

    def test_matches_estimator_variance(self, probe):
        assert mse_oracle_exact(probe, 1e-4, 1000) == pytest.approx(2.5e-6, rel=0.01)

    def test_range_limit(self, probe):
        with pytest.raises(OracleRangeError, match="m <= 5000"):
            mse_oracle_exact(probe, 0.0, 5001)

    @pytest.mark.parametrize("m", [1, 10, 100, 1000])
    def test_monte_carlo_converges_to_oracle(self, probe, m):
        config = CampaignConfig(probe=probe, prior=PriorWindow(width=1e-3), m=m, trials=1_000_000,
                                phi=1e-4, master_seed=2024 + m, workers=4)
        _, summary = run_campaign(config)
        oracle = mse_oracle_exact(probe, 1e-4, m)
        assert abs(summary.mse - oracle) < 4 * summary.mse_stderr

    def test_prior_averaged_respects_ziv_zakai(self, probe):
        prior = PriorWindow(width=1e-3)
        averaged = mse_oracle_prior_averaged(probe, prior, 5000)
        zz, _ = ziv_zakai_exact(probe, prior, 5000)
        assert averaged >= zz**2
        assert averaged == pytest.approx(mse_oracle_exact(probe, 5e-4, 5000), rel=0.05)
