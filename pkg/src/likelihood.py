"""
m-shot likelihood, maximum-likelihood phase estimator and the estimator's
sampling distribution ("posterior") on a phase grid.
"""
import math

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid
from scipy.special import gammaln, xlogy

from errors import CoverageError, RegimeError
from probe_model import as_phase, outcome_probability
from schemas import (EstimateResult, EstimatorMethod, GridSpec, Outcome, OutcomeTally,
                     PosteriorCurve, PosteriorMode, PriorWindow, ProbeSpec)
from utils import logger

GAUSSIAN_MIN_M = 100
GAUSSIAN_MIN_VARIANCE = 25.0
MIN_HALF_WIDTH_SIGMAS = 6.0
MAX_MASS_OUTSIDE = 1e-6


def binomial_log_pmf(k, m, p_plus, p_minus=None):
    """
    ln[C(m,k) p^k q^(m-k)] for real k in [0, m]; -inf outside.

    The coefficient uses log-gamma, so non-integer k is allowed.  q may be
    passed separately when it was computed more accurately than 1-p.
    """
    k = np.asarray(k, dtype=float)
    q = 1.0 - p_plus if p_minus is None else p_minus
    inside = (k >= 0.0) & (k <= m)
    kk = np.where(inside, k, 0.0)
    value = (gammaln(m + 1.0) - gammaln(kk + 1.0) - gammaln(m - kk + 1.0)
             + xlogy(kk, p_plus) + xlogy(m - kk, q))
    value = np.where(inside, value, -np.inf)
    if value.ndim == 0:
        return float(value)
    return value


def log_likelihood_exact(tally: OutcomeTally, probe: ProbeSpec, phi) -> float:
    """Log of the binomial probability of k positive outcomes in m shots."""
    p_plus = outcome_probability(probe, phi, Outcome.PLUS)
    p_minus = outcome_probability(probe, phi, Outcome.MINUS)
    return binomial_log_pmf(tally.k, tally.m, p_plus, p_minus)


def likelihood_gaussian(tally: OutcomeTally, probe: ProbeSpec, phi) -> float:
    """
    de Moivre-Laplace approximation of the binomial likelihood.

    Raises:
        RegimeError: m < 100 or m P(+)P(-) < 25
    """
    p_plus = outcome_probability(probe, phi, Outcome.PLUS)
    p_minus = outcome_probability(probe, phi, Outcome.MINUS)
    variance = tally.m * p_plus * p_minus
    if tally.m < GAUSSIAN_MIN_M or variance < GAUSSIAN_MIN_VARIANCE:
        raise RegimeError(
            f"Gaussian likelihood needs m >= {GAUSSIAN_MIN_M} and m*P(+)*P(-) >= "
            f"{GAUSSIAN_MIN_VARIANCE:g}; got m={tally.m}, m*P(+)*P(-)={variance:.4g}"
        )
    return math.exp(-(tally.k - tally.m * p_plus)**2 / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def estimator_sigma(probe: ProbeSpec, m: int) -> float:
    """nu / (2 sqrt(m) nbar): width of the Gaussian estimator distribution."""
    return probe.nu / (2.0 * math.sqrt(m) * probe.nbar)


def branch_limit(probe: ProbeSpec) -> float:
    """Largest |phi| the arcsin inversion can return: (nu^2/nbar)(pi/2)."""
    return 0.5 * math.pi / probe.fock_index


def resolve_method(requested, probe: ProbeSpec, prior: PriorWindow) -> EstimatorMethod:
    """
    Exact inversion is single valued only while W nbar/nu^2 <= pi/2;
    beyond that the linearized estimator is used instead.
    """
    method = EstimatorMethod(requested)
    if method == EstimatorMethod.EXACT_ARCSIN and prior.width * probe.fock_index > 0.5 * math.pi:
        logger.warning(f"W*nbar/nu^2 = {prior.width * probe.fock_index:.4g} > pi/2: "
                       "exact inversion is multi-valued, using the linearized estimator")
        return EstimatorMethod.LINEARIZED
    return method


def estimate_phase(k, m, probe: ProbeSpec, method=EstimatorMethod.LINEARIZED):
    """
    Vectorised maximum-likelihood estimate for tallies k out of m.

    Returns:
        (phi_hat, clamped) arrays; clamped is all False for the linearized map.
    """
    method = EstimatorMethod(method)
    offset = np.asarray(k, dtype=float) / m - 0.5
    if method == EstimatorMethod.LINEARIZED:
        phi_hat = offset * probe.nu / probe.nbar
        return phi_hat, np.zeros(phi_hat.shape, dtype=bool)
    ratio = offset / probe.amplitude
    clamped = np.abs(ratio) > 1.0
    phi_hat = np.arcsin(np.clip(ratio, -1.0, 1.0)) / probe.fock_index
    return phi_hat, clamped


def ml_estimate(tally: OutcomeTally, probe: ProbeSpec,
                method=EstimatorMethod.LINEARIZED) -> EstimateResult:
    """
    Phase that makes k/m the most likely tally.

    exact-arcsin solves P(+|phi) = k/m on the principal branch and clamps to
    +-(nu^2/nbar)(pi/2) when k/m is out of reach; linearized uses
    (k - m/2)/(m nbar/nu) and never clamps.
    """
    phi_hat, clamped = estimate_phase(tally.k, tally.m, probe, method)
    return EstimateResult(phi_hat=float(phi_hat), method=EstimatorMethod(method), clamped=bool(clamped))


def tally_for_estimate(phi_hat, m, probe: ProbeSpec, method=EstimatorMethod.LINEARIZED):
    """
    Inverse of the estimator map, k(phi_hat), as a real number.

    For exact-arcsin, phases beyond the principal branch map to NaN.
    """
    phi_hat = np.asarray(phi_hat, dtype=float)
    if EstimatorMethod(method) == EstimatorMethod.LINEARIZED:
        return 0.5 * m + m * probe.nbar * phi_hat / probe.nu
    k = m * np.asarray(outcome_probability(probe, phi_hat, Outcome.PLUS))
    return np.where(np.abs(phi_hat) <= branch_limit(probe), k, np.nan)


def _grid_center(probe, phi_true, m, mode, inversion):
    if mode == PosteriorMode.GAUSSIAN:
        return phi_true
    k_mean = m * outcome_probability(probe, phi_true, Outcome.PLUS)
    phi_hat, _ = estimate_phase(k_mean, m, probe, inversion)
    return float(phi_hat)


def _mass_outside(probe, phi_true, m, mode, inversion, grid, sigma):
    lo, hi = grid[0], grid[-1]
    if mode == PosteriorMode.GAUSSIAN:
        return float(stats.norm.cdf(lo, phi_true, sigma) + stats.norm.sf(hi, phi_true, sigma))
    k_edges = tally_for_estimate(np.array([lo, hi]), m, probe, inversion)
    k_lo = 0.0 if np.isnan(k_edges[0]) else k_edges[0]
    k_hi = float(m) if np.isnan(k_edges[1]) else k_edges[1]
    p_plus = outcome_probability(probe, phi_true, Outcome.PLUS)
    return float(stats.binom.cdf(math.ceil(k_lo) - 1, m, p_plus)
                 + stats.binom.sf(math.floor(k_hi), m, p_plus))


def posterior_curve(probe: ProbeSpec, phi_true, m: int, mode=PosteriorMode.EXACT,
                    grid_spec: GridSpec = None, inversion=EstimatorMethod.EXACT_ARCSIN,
                    grid=None) -> PosteriorCurve:
    """
    Sampling distribution P(phi_hat | phi) of the estimator on a uniform grid.

    exact-binomial evaluates the binomial pmf at k(phi_hat) (continuous k through
    log-gamma); gaussian-approx evaluates the closed form
    sqrt(2 m nbar^2/(pi nu^2)) exp[-2 (m nbar^2/nu^2)(phi_hat - phi)^2].
    Both are rescaled to unit trapezoidal mass.

    Args:
        probe: probe parameters
        phi_true: true phase (radians)
        m: repetitions
        mode: PosteriorMode
        grid_spec: GridSpec; default 4001 points over +-8 sigma
        inversion: estimator map used by the exact mode
        grid: explicit grid overriding grid_spec

    Raises:
        CoverageError: grid narrower than +-6 sigma or more than 1e-6 of the mass
            falls outside it
    """
    if m < 1:
        raise ValueError("repetition count m must be at least 1")
    mode = PosteriorMode(mode)
    inversion = EstimatorMethod(inversion)
    phi_true = float(as_phase(phi_true))
    grid_spec = grid_spec or GridSpec()
    sigma = estimator_sigma(probe, m)
    center = grid_spec.center if grid_spec.center is not None else _grid_center(probe, phi_true, m, mode, inversion)

    if grid is None:
        if grid_spec.half_width_sigmas < MIN_HALF_WIDTH_SIGMAS:
            raise CoverageError(f"grid half width {grid_spec.half_width_sigmas} sigma is below "
                                f"{MIN_HALF_WIDTH_SIGMAS} sigma", mass_outside=float('nan'))
        half = grid_spec.half_width_sigmas * sigma
        grid = np.linspace(center - half, center + half, grid_spec.points)
    else:
        grid = np.array(grid, dtype=float)
        if grid[0] > center - MIN_HALF_WIDTH_SIGMAS * sigma or grid[-1] < center + MIN_HALF_WIDTH_SIGMAS * sigma:
            raise CoverageError(f"grid [{grid[0]:.4g}, {grid[-1]:.4g}] does not span "
                                f"+-{MIN_HALF_WIDTH_SIGMAS} sigma around {center:.4g}", mass_outside=float('nan'))

    mass_outside = _mass_outside(probe, phi_true, m, mode, inversion, grid, sigma)
    if mass_outside > MAX_MASS_OUTSIDE:
        raise CoverageError(f"{mass_outside:.3g} of the posterior mass lies outside the grid",
                            mass_outside=mass_outside)

    if mode == PosteriorMode.GAUSSIAN:
        scale = m * probe.nbar**2 / probe.nu**2
        raw = math.sqrt(2.0 * scale / math.pi) * np.exp(-2.0 * scale * (grid - phi_true)**2)
        normalization = float(trapezoid(raw, grid))
        density = raw / normalization
    else:
        k = tally_for_estimate(grid, m, probe, inversion)
        p_plus = outcome_probability(probe, phi_true, Outcome.PLUS)
        p_minus = outcome_probability(probe, phi_true, Outcome.MINUS)
        log_pmf = binomial_log_pmf(np.nan_to_num(k, nan=-1.0), m, p_plus, p_minus)
        peak = float(np.max(log_pmf))
        relative = np.exp(log_pmf - peak)
        area = float(trapezoid(relative, grid))
        normalization = area * math.exp(peak)
        density = relative / area

    logger.debug(f"Posterior {mode.value}/{inversion.value}: {grid.size} points, "
                 f"raw mass {normalization:.6g}, outside {mass_outside:.2g}")
    return PosteriorCurve(grid=grid, density=density, mode=mode, inversion=inversion,
                          normalization=normalization, center=center, sigma=sigma)


def posterior_moments(curve: PosteriorCurve):
    """Trapezoidal mean and central second moment of a posterior curve."""
    grid, density = curve.grid, curve.density
    mass = trapezoid(density, grid)
    mean = trapezoid(grid * density, grid) / mass
    variance = trapezoid((grid - mean)**2 * density, grid) / mass
    return float(mean), float(variance)


def curve_gap(exact: PosteriorCurve, approx: PosteriorCurve, floor=0.01):
    """
    Agreement between two posterior curves where approx exceeds `floor` of its peak.

    Returns:
        (peak_relative, pointwise_relative): max |exact - approx| divided by the
        approx peak, and divided by approx itself
    """
    exact_density = exact.density
    if exact.grid.shape != approx.grid.shape or not np.array_equal(exact.grid, approx.grid):
        exact_density = np.interp(approx.grid, exact.grid, exact.density, left=0.0, right=0.0)
    peak = float(np.max(approx.density))
    region = approx.density > floor * peak
    diff = np.abs(exact_density[region] - approx.density[region])
    return float(np.max(diff) / peak), float(np.max(diff / approx.density[region]))
