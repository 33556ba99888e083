"""
Adaptive Simpson integration with a relative tolerance and a hard depth limit.
"""
import math
from typing import Callable, NamedTuple

from errors import QuadratureError
from utils import logger

MAX_DEPTH = 60
_ROUNDOFF = 64 * 2.220446049250313e-16


class QuadratureResult(NamedTuple):
    value: float
    abs_error: float
    evaluations: int


def _simpson(fa, fm, fb, h):
    """Simpson's rule on an interval of half-width h."""
    return h / 3.0 * (fa + 4.0 * fm + fb)


class _Integrator:
    """Holds the integrand and running counters for one integral."""

    def __init__(self, f, max_depth):
        self.f = f
        self.max_depth = max_depth
        self.evaluations = 0
        self.failed_intervals = 0

    def __call__(self, x):
        self.evaluations += 1
        return self.f(x)

    def adaptive(self, a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        h = 0.5 * (b - a)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = self(lm)
        frm = self(rm)
        left = _simpson(fa, flm, fm, h / 2.0)
        right = _simpson(fm, frm, fb, h / 2.0)
        combined = left + right
        delta = combined - whole

        if abs(delta) <= 15.0 * tol or abs(delta) <= _ROUNDOFF * abs(combined):
            return combined + delta / 15.0, abs(delta) / 15.0
        if depth >= self.max_depth or not (a < lm < m < rm < b):
            self.failed_intervals += 1
            return combined + delta / 15.0, abs(delta) / 15.0

        lv, le = self.adaptive(a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
        rv, re = self.adaptive(m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
        return lv + rv, le + re


def integrate(f: Callable[[float], float], a: float, b: float, rel_tol: float = 1e-8,
              panels: int = 1, abs_floor: float = 0.0, max_depth: int = MAX_DEPTH) -> QuadratureResult:
    """
    Integrate f over [a, b] by adaptive Simpson.

    The interval is first cut into `panels` equal pieces so that features narrower
    than b-a (a peak near one end, oscillations) are sampled before any panel is
    accepted.  A coarse pass over the panels sets the absolute target
    rel_tol*|I|, which is shared between panels in proportion to their width and
    halved at each subdivision.

    Args:
        f: scalar integrand
        a, b: limits, a < b
        rel_tol: relative tolerance
        panels: number of initial equal panels
        abs_floor: lower bound on the absolute tolerance
        max_depth: subdivision depth limit

    Returns:
        QuadratureResult(value, abs_error, evaluations)

    Raises:
        QuadratureError: some subinterval reached max_depth without meeting its
            tolerance; carries the partial value and its error estimate.
    """
    if not a < b:
        raise ValueError(f"integration limits must satisfy a < b, got [{a}, {b}]")
    if rel_tol <= 0.0:
        raise ValueError("relative tolerance must be positive")
    panels = max(1, int(panels))

    integrator = _Integrator(f, max_depth)
    edges = [a + (b - a) * i / panels for i in range(panels)] + [b]
    coarse = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = integrator(lo), integrator(mid), integrator(hi)
        coarse.append((lo, hi, flo, fmid, fhi, _simpson(flo, fmid, fhi, 0.5 * (hi - lo))))

    estimate = math.fsum(c[-1] for c in coarse)
    target = max(rel_tol * abs(estimate), abs_floor)

    values, errors = [], []
    for lo, hi, flo, fmid, fhi, whole in coarse:
        tol = target * (hi - lo) / (b - a)
        v, e = integrator.adaptive(lo, hi, flo, fmid, fhi, whole, tol, 1)
        values.append(v)
        errors.append(e)

    value = math.fsum(values)
    abs_error = math.fsum(errors)
    logger.debug(f"Quadrature on [{a:.4g}, {b:.4g}]: {panels} panels, "
                 f"{integrator.evaluations} evaluations, value={value:.10g}, err={abs_error:.3g}")

    if integrator.failed_intervals:
        raise QuadratureError(
            f"adaptive Simpson hit depth limit {max_depth} on {integrator.failed_intervals} "
            f"subinterval(s); partial value {value:.6g} +/- {abs_error:.3g}",
            partial=value,
            abs_error=abs_error,
        )
    return QuadratureResult(value, abs_error, integrator.evaluations)
