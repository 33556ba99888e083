"""
Probe-state physics for the unbalanced cat probe.

sqrt(1-nu^2)|0> + nu|nbar/nu^2>, phase-shifted by exp(i*phi*n).  Every function
here is pure and accepts scalar or array phases.
"""
import math

import numpy as np

from schemas import (C1_THRESHOLD, C2_THRESHOLD, ConditionDiagnostics, Outcome,
                     PhaseValue, PriorWindow, ProbeSpec)
from utils import logger


def as_phase(phi):
    """Unwrap a PhaseValue; pass floats and arrays through."""
    if isinstance(phi, PhaseValue):
        return phi.phi
    return phi


def _scalar_or_array(value):
    if np.ndim(value) == 0:
        return float(value)
    return value


def phase_argument(probe: ProbeSpec, phi):
    """nbar*phi/nu^2, the angle the Fock component rotates through."""
    return np.asarray(as_phase(phi), dtype=float) * probe.fock_index


def one_minus_overlap(probe: ProbeSpec, phi):
    """
    1 - |<psi|psi(phi)>|^2 via the half-angle form.

    4 nu^2 (1-nu^2) sin^2(nbar phi / 2nu^2); no cancellation at small phi.
    """
    half = 0.5 * phase_argument(probe, phi)
    return _scalar_or_array(4.0 * probe.nu**2 * (1.0 - probe.nu**2) * np.sin(half)**2)


def overlap_squared(probe: ProbeSpec, phi):
    """
    Squared overlap between the probe and its phase-shifted copy.

    Args:
        probe: probe parameters
        phi: phase shift (radians), scalar or array

    Returns:
        (1-nu^2)^2 + nu^4 + 2 nu^2 (1-nu^2) cos(nbar phi/nu^2), in [0, 1]
    """
    # same polynomial, regrouped as 1 - 4 nu^2 (1-nu^2) sin^2(x/2)
    value = 1.0 - np.asarray(one_minus_overlap(probe, phi))
    return _scalar_or_array(np.clip(value, 0.0, 1.0))


def outcome_probability(probe: ProbeSpec, phi, outcome=Outcome.PLUS):
    """P(+-|phi) = 1/2 +- nu sqrt(1-nu^2) sin(phi nbar/nu^2)."""
    swing = probe.amplitude * np.sin(phase_argument(probe, phi))
    if Outcome(outcome) == Outcome.PLUS:
        return _scalar_or_array(0.5 + swing)
    return _scalar_or_array(0.5 - swing)


def outcome_probability_derivative(probe: ProbeSpec, phi):
    """d P(+|phi) / d phi."""
    x = phase_argument(probe, phi)
    return _scalar_or_array(probe.amplitude * probe.fock_index * np.cos(x))


def quantum_fisher_information(probe: ProbeSpec):
    """
    Four times the photon-number variance of the probe.

    <n> = nbar and <n^2> = nbar^2/nu^2, so F_Q = 4 nbar^2 (1-nu^2)/nu^2.
    The value does not depend on phi for a pure state under exp(i phi n).
    """
    return 4.0 * probe.nbar**2 * (1.0 - probe.nu**2) / probe.nu**2


def classical_fisher_information(probe: ProbeSpec, phi):
    """
    Fisher information of one +/- measurement.

    (dP/dphi)^2 [1/P(+) + 1/P(-)] rewritten as
    (nbar/nu^2)^2 c^2 cos^2 x / ((1/2 - nu^2)^2 + c^2 cos^2 x) with
    c = nu sqrt(1-nu^2); P(+)P(-) = (1/2-nu^2)^2 + c^2 cos^2 x exactly, which keeps
    the value finite where one outcome probability touches 0 (nu^2 = 1/2).
    """
    x = phase_argument(probe, phi)
    c2 = probe.amplitude**2
    gap = (0.5 - probe.nu**2)**2
    cos2 = np.cos(x)**2
    numerator = probe.fock_index**2 * c2 * cos2
    denominator = gap + c2 * cos2
    # 0/0 only at nu^2 = 1/2 with cos x = 0; the limit there is (nbar/nu^2)^2
    with np.errstate(invalid='ignore', divide='ignore'):
        value = np.where(denominator > 0.0, numerator / np.where(denominator > 0.0, denominator, 1.0),
                         probe.fock_index**2)
    return _scalar_or_array(value)


def condition_diagnostics(probe: ProbeSpec, prior: PriorWindow, m: int) -> ConditionDiagnostics:
    """
    Dimensionless ratios behind the closed-form Ziv-Zakai bound.

    c1 = W nbar/nu^2 (want << 1), c2 = sqrt(m) nbar W/nu (want >> 1),
    and their consequence m nu^2.
    """
    if m < 1:
        raise ValueError("repetition count m must be at least 1")
    c1 = prior.width * probe.fock_index
    c2 = math.sqrt(m) * probe.nbar * prior.width / probe.nu
    diagnostics = ConditionDiagnostics(
        c1=c1,
        c2=c2,
        mnu2=m * probe.nu**2,
        c1_ok=c1 <= C1_THRESHOLD,
        c2_ok=c2 >= C2_THRESHOLD,
    )
    if not probe.integer_fock:
        logger.warning(f"Fock index nbar/nu^2 = {probe.fock_index:.6g} is not an integer; "
                       "formulas use the real value")
    if not (diagnostics.c1_ok and diagnostics.c2_ok):
        logger.warning(f"Closed-form conditions not met: c1={c1:.4g} (<= {C1_THRESHOLD}), "
                       f"c2={c2:.4g} (>= {C2_THRESHOLD})")
    return diagnostics
