"""
Monte Carlo campaigns: repeated m-shot experiments, estimator errors and the
empirical mean-square error against the bounds.

Random numbers come from Philox4x64-10 (numpy.random.Philox) keyed by the
64-bit master seed.  Trials are grouped into fixed blocks of BLOCK_SIZE
indices; block b starts its counter at b * 2**128, so every block is an
independent substream and trial i depends only on (master_seed, i, config).
Within a block the draws are: phases (sample-from-prior only), then binomial
tallies.
"""
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from bounds import cramer_rao, fisher_information_average, reference_scales, ziv_zakai_closed
from errors import OracleRangeError
from likelihood import binomial_log_pmf, estimate_phase, resolve_method
from probe_model import as_phase, outcome_probability
from quadrature import integrate
from schemas import (CampaignConfig, CampaignSummary, EstimatorMethod, Outcome, PhiPolicy,
                     PriorWindow, ProbeSpec, TrialRecord)
from utils import logger

BLOCK_SIZE = 4096
CLAMP_WARNING_FRACTION = 0.01
ORACLE_MAX_M = 5000
RECORD_COLUMNS = ['index', 'phi_true', 'k', 'phi_hat', 'error', 'clamped']


def block_stream(master_seed: int, block: int) -> np.random.Generator:
    """Counter-based substream for one block of trials."""
    return np.random.Generator(np.random.Philox(key=master_seed, counter=block << 128))


def sample_tally(probe: ProbeSpec, phi, m: int, stream: np.random.Generator):
    """
    Number of + outcomes in m shots at phase phi.

    Generator.binomial is exact: inversion when m*p < 30, BTPE accept-reject
    otherwise.  phi may be an array, giving one tally per phase.
    """
    p_plus = outcome_probability(probe, as_phase(phi), Outcome.PLUS)
    return stream.binomial(m, p_plus)


def _run_block(config: CampaignConfig, method: EstimatorMethod, block: int):
    start = block * BLOCK_SIZE
    stop = min(start + BLOCK_SIZE, config.trials)
    size = stop - start
    stream = block_stream(config.master_seed, block)

    if config.phi_policy == PhiPolicy.PRIOR:
        phi_true = stream.random(size) * config.prior.width
    else:
        phi_true = np.full(size, config.phi, dtype=float)
    k = np.asarray(sample_tally(config.probe, phi_true, config.m, stream), dtype=np.int64)
    phi_hat, clamped = estimate_phase(k, config.m, config.probe, method)
    logger.debug(f"Block {block}: trials {start}..{stop - 1}")
    return pd.DataFrame({
        'index': np.arange(start, stop, dtype=np.int64),
        'phi_true': phi_true,
        'k': k,
        'phi_hat': phi_hat,
        'error': phi_hat - phi_true,
        'clamped': clamped,
    }, columns=RECORD_COLUMNS)


def _resolved_method(config: CampaignConfig) -> EstimatorMethod:
    return resolve_method(config.method, config.probe, config.prior)


def reference_cramer_rao(config: CampaignConfig) -> float:
    """CR bound at the fixed phase, or with the prior-averaged Fisher information."""
    if config.phi_policy == PhiPolicy.FIXED:
        return cramer_rao(config.probe, config.m, config.phi, 'classical')
    average, _ = fisher_information_average(config.probe, config.prior)
    return math.sqrt(1.0 / (config.m * average))


def summarize(records: pd.DataFrame, config: CampaignConfig) -> CampaignSummary:
    """Aggregate trial records (sorted by index) into MSE, bias and bound ratios."""
    records = records.sort_values('index', kind='stable')
    errors = records['error'].to_numpy(dtype=float)
    n = errors.size
    squared = errors**2
    mse = float(np.mean(squared))
    bias = float(np.mean(errors))
    if n > 1:
        mse_stderr = float(np.std(squared, ddof=1) / math.sqrt(n))
        bias_stderr = float(np.std(errors, ddof=1) / math.sqrt(n))
    else:
        mse_stderr = bias_stderr = 0.0
    rmse = math.sqrt(mse)
    rmse_stderr = mse_stderr / (2.0 * rmse) if rmse > 0.0 else 0.0
    clamp_fraction = float(np.mean(records['clamped'].to_numpy(dtype=bool)))
    clamp_warning = clamp_fraction > CLAMP_WARNING_FRACTION
    if clamp_warning:
        logger.warning(f"{clamp_fraction:.2%} of trials clamped to the estimator branch limit")

    weak, strong = reference_scales(config.probe, config.m)
    comparisons = {
        'weak': rmse / weak,
        'strong': rmse / strong,
        'W': rmse / config.prior.width,
        'cr': rmse / reference_cramer_rao(config),
        'qcr': rmse / cramer_rao(config.probe, config.m, which='quantum'),
        'zz_closed': rmse / ziv_zakai_closed(config.probe, config.m),
    }
    return CampaignSummary(
        trials=n,
        mse=mse,
        mse_stderr=mse_stderr,
        bias=bias,
        bias_stderr=bias_stderr,
        rmse=rmse,
        rmse_stderr=rmse_stderr,
        clamp_fraction=clamp_fraction,
        clamp_warning=clamp_warning,
        comparisons=comparisons,
    )


def run_campaign(config: CampaignConfig):
    """
    Simulate config.trials independent experiments.

    Blocks run on up to config.workers threads; the result does not depend on
    the worker count or scheduling.

    Returns:
        (records DataFrame with RECORD_COLUMNS, CampaignSummary)
    """
    method = _resolved_method(config)
    n_blocks = math.ceil(config.trials / BLOCK_SIZE)
    logger.info(f"Campaign: {config.trials} trials of m={config.m} shots, policy={config.phi_policy.value}, "
                f"method={method.value}, seed={config.master_seed}, {n_blocks} blocks on {config.workers} worker(s)")

    if config.workers == 1 or n_blocks == 1:
        frames = [_run_block(config, method, b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            frames = list(pool.map(lambda b: _run_block(config, method, b), range(n_blocks)))

    records = pd.concat(frames, ignore_index=True)
    summary = summarize(records, config)
    logger.info(f"Campaign done: rmse={summary.rmse:.5g} +/- {summary.rmse_stderr:.2g}, "
                f"bias={summary.bias:.3g} +/- {summary.bias_stderr:.2g}")
    return records, summary


def replay_trial(config: CampaignConfig, index: int) -> TrialRecord:
    """Recompute a single trial from (master_seed, index, config)."""
    if not 0 <= index < config.trials:
        raise ValueError(f"trial index {index} outside [0, {config.trials})")
    block = index // BLOCK_SIZE
    frame = _run_block(config, _resolved_method(config), block)
    row = frame.iloc[index - block * BLOCK_SIZE]
    return TrialRecord(index=int(row['index']), phi_true=float(row['phi_true']), k=int(row['k']),
                       phi_hat=float(row['phi_hat']), error=float(row['error']), clamped=bool(row['clamped']))


def mse_oracle_exact(probe: ProbeSpec, phi, m: int, method=EstimatorMethod.LINEARIZED) -> float:
    """
    sum_k P(k|phi) (phi_hat(k) - phi)^2 over every tally k = 0..m.

    Raises:
        OracleRangeError: m > 5000
    """
    if m < 1:
        raise ValueError("repetition count m must be at least 1")
    if m > ORACLE_MAX_M:
        raise OracleRangeError(f"exhaustive oracle limited to m <= {ORACLE_MAX_M}, got m={m}")
    phi = float(as_phase(phi))
    k = np.arange(m + 1)
    p_plus = outcome_probability(probe, phi, Outcome.PLUS)
    p_minus = outcome_probability(probe, phi, Outcome.MINUS)
    pmf = np.exp(binomial_log_pmf(k, m, p_plus, p_minus))
    phi_hat, _ = estimate_phase(k, m, probe, method)
    return math.fsum(pmf * (phi_hat - phi)**2)


def mse_oracle_prior_averaged(probe: ProbeSpec, prior: PriorWindow, m: int,
                              method=EstimatorMethod.LINEARIZED, tol: float = 1e-6) -> float:
    """Prior-averaged MSE (1/W) int_0^W MSE(phi) dphi over the exhaustive oracle."""
    period = 2.0 * math.pi / probe.fock_index
    panels = max(8, min(256, math.ceil(8.0 * prior.width / period)))
    result = integrate(lambda phi: mse_oracle_exact(probe, phi, m, method),
                       0.0, prior.width, rel_tol=tol, panels=panels)
    return result.value / prior.width
