"""
Command handlers behind the CLI: bounds, posterior, simulate, sweep, reproduce.

Every handler resolves its parameters, computes, writes CSV outputs plus a run
manifest, and returns (result, text) where text is the table shown on stdout.
"""
import json
import math

import numpy as np
import pandas as pd

from bounds import full_report, reference_scales
from errors import ValidationError
from likelihood import curve_gap, estimator_sigma, posterior_curve, posterior_moments, resolve_method
from montecarlo import run_campaign
from reporter import ReportWriter, format_table
from schemas import (CampaignConfig, EstimatorMethod, PhiPolicy, PosteriorMode, PriorWindow,
                     ProbeSpec)
from utils import logger

DEFAULTS = {
    'W': 1e-3,
    'nbar': 1.0,
    'm': 1_000_000,
    'nu': 0.1,
    'phi': 1e-4,
    'seed': 0,
    'tol': 1e-8,
    'method': EstimatorMethod.LINEARIZED.value,
    'policy': PhiPolicy.FIXED.value,
    'workers': 1,
    'inversion': EstimatorMethod.EXACT_ARCSIN.value,
    'points': 4001,
    'half_width': 8.0,
}
DEFAULT_TRIALS = 10_000

FIGURE_PRESETS = {
    'fig1': {'W': 1e-3, 'nbar': 1.0, 'm': 1_000_000, 'nu': 0.1, 'phi': 1e-4, 'gap_threshold': 0.02},
    'fig2': {'W': 1e-3, 'nbar': 1.0, 'm': 16_000, 'nu': 0.03, 'phi': 1e-4, 'gap_threshold': 0.05},
}

KNOWN_KEYS = set(DEFAULTS) | {'trials', 'vary', 'values', 'fixed_mnu2', 'figure', 'gap_threshold'}
SWEEPABLE = ('m', 'nu', 'nbar', 'W')
COUNT_KEYS = ('m', 'trials', 'seed', 'workers', 'points')


def load_config(config_path):
    """
    Load a flat JSON key/value config, or the parameters of a run manifest.

    Raises:
        ValidationError: unreadable file, bad JSON or unknown keys
    """
    try:
        with open(config_path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"configuration file not found: {config_path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in configuration file {config_path}: {e}")
    if not isinstance(data, dict):
        raise ValidationError(f"configuration file {config_path} must hold a JSON object")
    if 'parameters' in data and 'command' in data:
        logger.info(f"Replaying parameters of a '{data['command']}' manifest from {config_path}")
        data = data['parameters']
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ValidationError(f"unknown configuration key(s) in {config_path}: {', '.join(unknown)}")
    logger.info(f"Loaded configuration from {config_path}")
    return data


def _as_count(value, name):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lstrip('+-').isdigit():
        return int(value.strip())
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(number) or number != int(number):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    return int(number)


def _as_float(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}")


def resolve_parameters(cli_values=None, config_path=None, preset=None):
    """
    Merge defaults < preset < config file < command-line flags.

    Returns:
        dict of normalized, JSON-serializable parameters
    """
    params = dict(DEFAULTS)
    if preset:
        params.update(preset)
    if config_path:
        params.update(load_config(config_path))
    for key, value in (cli_values or {}).items():
        if value is not None:
            params[key] = value

    for key in COUNT_KEYS:
        if key in params and params[key] is not None:
            params[key] = _as_count(params[key], key)
    for key in ('W', 'nbar', 'nu', 'phi', 'tol', 'half_width', 'fixed_mnu2', 'gap_threshold'):
        if key in params and params[key] is not None:
            params[key] = _as_float(params[key], key)
    if params.get('values') is not None:
        values = params['values']
        if isinstance(values, str):
            values = [v for v in values.split(',') if v.strip()]
        params['values'] = [_as_float(v, 'values') for v in values]
    if params['m'] < 1:
        raise ValidationError("repetition count m must be at least 1")
    return params


def build_scenario(params):
    """ProbeSpec, PriorWindow and m from resolved parameters."""
    probe = ProbeSpec(nu=params['nu'], nbar=params['nbar'])
    prior = PriorWindow(width=params['W'])
    return probe, prior, params['m']


def build_campaign(params):
    probe, prior, m = build_scenario(params)
    policy = PhiPolicy(params['policy'])
    return CampaignConfig(
        probe=probe,
        prior=prior,
        m=m,
        trials=params.get('trials', DEFAULT_TRIALS),
        phi_policy=policy,
        phi=params['phi'] if policy == PhiPolicy.FIXED else None,
        method=EstimatorMethod(params['method']),
        master_seed=params['seed'],
        workers=params['workers'],
    )


def _summary_rows(summary):
    rows = [
        ('trials', summary.trials),
        ('mse', summary.mse),
        ('mse_stderr', summary.mse_stderr),
        ('rmse', summary.rmse),
        ('rmse_stderr', summary.rmse_stderr),
        ('bias', summary.bias),
        ('bias_stderr', summary.bias_stderr),
        ('clamp_fraction', summary.clamp_fraction),
        ('clamp_warning', summary.clamp_warning),
    ]
    rows += [(f"rmse_over_{name}", ratio) for name, ratio in summary.comparisons.items()]
    return rows


class PhaseBenchHandler:
    """Runs CLI commands and writes their outputs into one directory."""

    VERSION = "1.0.0"
    VERSION_DATE = "2026-10-18"

    def __init__(self, outdir):
        self.outdir = outdir

    def _writer(self, command, tag=None):
        return ReportWriter(self.outdir, command, self.VERSION, tag=tag)

    def _curve_pair(self, probe, prior, m, phi, params):
        """Exact and Gaussian posterior curves on one shared grid centred at phi."""
        inversion = resolve_method(params['inversion'], probe, prior)
        sigma = estimator_sigma(probe, m)
        half = params['half_width'] * sigma
        grid = np.linspace(phi - half, phi + half, params['points'])
        exact = posterior_curve(probe, phi, m, PosteriorMode.EXACT, inversion=inversion, grid=grid)
        gauss = posterior_curve(probe, phi, m, PosteriorMode.GAUSSIAN, grid=grid)
        return exact, gauss

    @staticmethod
    def _curve_frame(exact, gauss):
        return pd.DataFrame({
            'phi_hat': exact.grid,
            'density_exact': exact.density,
            'density_gauss': gauss.density,
        })

    def cmd_bounds(self, params):
        """Bounds table for one scenario."""
        probe, prior, m = build_scenario(params)
        report = full_report(probe, prior, m, params['phi'], params['tol'])
        rows = report.as_rows()
        writer = self._writer('bounds')
        writer.write_rows('bounds.csv', rows)
        writer.write_manifest(params)
        return report, format_table(rows, title=f"Bounds (m={m}, nu={probe.nu:g}, nbar={probe.nbar:g}, W={prior.width:g})")

    def cmd_posterior(self, params):
        """Exact and Gaussian posterior curves plus their moments."""
        probe, prior, m = build_scenario(params)
        exact, gauss = self._curve_pair(probe, prior, m, params['phi'], params)
        mean_exact, var_exact = posterior_moments(exact)
        mean_gauss, var_gauss = posterior_moments(gauss)
        gap_peak, gap_pointwise = curve_gap(exact, gauss)
        rows = [
            ('inversion', exact.inversion.value),
            ('mean_exact', mean_exact),
            ('sigma_exact', math.sqrt(var_exact)),
            ('mean_gauss', mean_gauss),
            ('sigma_gauss', math.sqrt(var_gauss)),
            ('gap_peak_relative', gap_peak),
            ('gap_pointwise_relative', gap_pointwise),
        ]
        writer = self._writer('posterior')
        writer.write_frame('posterior.csv', self._curve_frame(exact, gauss))
        writer.write_rows('posterior_summary.csv', rows)
        writer.write_manifest(params)
        return dict(rows), format_table(rows, title="Posterior")

    def cmd_reproduce(self, figure, params):
        """
        Regenerate a reference figure's curves and ratio chain.

        Args:
            figure: 'fig1' or 'fig2'
            params: resolved parameters (preset values already merged)
        """
        if figure not in FIGURE_PRESETS:
            raise ValidationError(f"unknown figure '{figure}', choose from {', '.join(FIGURE_PRESETS)}")
        params = dict(params, figure=figure)
        probe, prior, m = build_scenario(params)
        phi = params['phi']
        exact, gauss = self._curve_pair(probe, prior, m, phi, params)
        mean_exact, var_exact = posterior_moments(exact)
        mean_gauss, var_gauss = posterior_moments(gauss)
        sigma = math.sqrt(var_gauss)
        weak, strong = reference_scales(probe, m)
        gap_peak, gap_pointwise = curve_gap(exact, gauss)
        threshold = params.get('gap_threshold', FIGURE_PRESETS[figure]['gap_threshold'])
        report = full_report(probe, prior, m, phi, params['tol'])

        rows = [
            ('sigma_gauss', sigma),
            ('sigma_exact', math.sqrt(var_exact)),
            ('mean_gauss', mean_gauss),
            ('mean_exact', mean_exact),
            ('phi_marker', phi),
            ('W_marker', prior.width),
            ('ratio_weak', sigma / weak),
            ('ratio_W', sigma / prior.width),
            ('ratio_strong', sigma / strong),
            ('gap_peak_relative', gap_peak),
            ('gap_pointwise_relative', gap_pointwise),
            ('gap_threshold', threshold),
            ('gap_ok', gap_peak < threshold),
            ('cr', report.cr),
            ('qcr', report.qcr),
            ('bcr', report.bcr),
            ('zz_exact', report.zz_exact),
            ('zz_closed', report.zz_closed),
            ('c1', report.diagnostics.c1),
            ('c2', report.diagnostics.c2),
            ('mnu2', report.diagnostics.mnu2),
        ]
        seed = None
        if params.get('trials'):
            _, summary = run_campaign(build_campaign(params))
            seed = params['seed']
            rows += [
                ('mc_trials', summary.trials),
                ('mc_rmse', summary.rmse),
                ('mc_rmse_stderr', summary.rmse_stderr),
                ('mc_bias', summary.bias),
                ('mc_ratio_weak', summary.comparisons['weak']),
                ('mc_ratio_W', summary.comparisons['W']),
                ('mc_ratio_strong', summary.comparisons['strong']),
            ]
        if gap_peak >= threshold:
            logger.warning(f"{figure}: exact and Gaussian curves differ by {gap_peak:.3%} (threshold {threshold:.0%})")

        writer = self._writer('reproduce', tag=figure)
        writer.write_frame(f"{figure}_curve.csv", self._curve_frame(exact, gauss))
        writer.write_rows(f"{figure}_summary.csv", rows)
        writer.write_manifest(params, master_seed=seed)
        return dict(rows), format_table(rows, title=f"Reproduce {figure}")

    def cmd_simulate(self, params):
        """Monte Carlo campaign: per-trial records, summary and manifest."""
        params = dict(params)
        params.setdefault('trials', DEFAULT_TRIALS)
        config = build_campaign(params)
        records, summary = run_campaign(config)
        rows = _summary_rows(summary)
        writer = self._writer('simulate')
        writer.write_frame('records.csv', records)
        writer.write_rows('summary.csv', rows)
        writer.write_manifest(params, master_seed=config.master_seed)
        return summary, format_table(rows, title=f"Campaign ({summary.trials} trials)")

    def cmd_sweep(self, params):
        """
        One bounds report per value of the swept parameter.

        With fixed_mnu2 the partner of the swept variable (m for nu, nu for m)
        is recomputed so that m nu^2 stays constant.  With trials set, each
        point also gets a fixed-phase Monte Carlo rmse.
        """
        vary = params.get('vary')
        values = params.get('values') or []
        if vary not in SWEEPABLE:
            raise ValidationError(f"sweep variable must be one of {', '.join(SWEEPABLE)}, got {vary!r}")
        if not values:
            raise ValidationError("sweep range is empty")
        fixed_mnu2 = params.get('fixed_mnu2')
        if fixed_mnu2 is not None and vary not in ('m', 'nu'):
            raise ValidationError("fixed_mnu2 applies only to sweeps over m or nu")

        rows = []
        for value in values:
            point = dict(params)
            point[vary] = _as_count(value, 'm') if vary == 'm' else value
            if fixed_mnu2 is not None:
                if vary == 'nu':
                    point['m'] = max(1, round(fixed_mnu2 / value**2))
                else:
                    point['nu'] = math.sqrt(fixed_mnu2 / point['m'])
            probe, prior, m = build_scenario(point)
            report = full_report(probe, prior, m, point['phi'], point['tol'])
            row = {'W': prior.width, 'nbar': probe.nbar, 'm': m, 'nu': probe.nu, 'phi': point['phi']}
            row.update(dict(report.as_rows()))
            if point.get('trials'):
                _, summary = run_campaign(build_campaign(dict(point, policy=PhiPolicy.FIXED.value)))
                row.update({
                    'mc_rmse': summary.rmse,
                    'mc_rmse_stderr': summary.rmse_stderr,
                    'mc_rmse_over_strong': summary.comparisons['strong'],
                })
            rows.append(row)

        frame = pd.DataFrame(rows)
        writer = self._writer('sweep')
        writer.write_frame('sweep.csv', frame)
        writer.write_manifest(params, master_seed=params['seed'] if params.get('trials') else None)
        preview = frame[['m', 'nu', 'zz_exact', 'zz_closed', 'cr']].to_string(index=False)
        return frame, f"Sweep over {vary} ({len(rows)} points)\n{preview}"
