"""
Validated domain types shared by every module.

All models are frozen: once built they can be handed to any thread.
"""
import math
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

INTEGER_FOCK_TOLERANCE = 1e-9
C1_THRESHOLD = 0.3
C2_THRESHOLD = 5.0
UINT64_MAX = 2**64 - 1


class EstimatorMethod(str, Enum):
    EXACT_ARCSIN = 'exact-arcsin'
    LINEARIZED = 'linearized'


class PosteriorMode(str, Enum):
    EXACT = 'exact-binomial'
    GAUSSIAN = 'gaussian-approx'


class PhiPolicy(str, Enum):
    FIXED = 'fixed'
    PRIOR = 'sample-from-prior'


class Outcome(str, Enum):
    PLUS = '+'
    MINUS = '-'


def _finite(value, name):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return value


# Probe / scenario

class ProbeSpec(BaseModel):
    """Unbalanced cat probe sqrt(1-nu^2)|0> + nu|nbar/nu^2>."""
    model_config = ConfigDict(frozen=True)

    nu: float
    nbar: float

    @field_validator('nu')
    @classmethod
    def _check_nu(cls, v):
        _finite(v, 'nu')
        if not 0.0 < v < 1.0:
            raise ValueError("nu must lie strictly between 0 and 1")
        return v

    @field_validator('nbar')
    @classmethod
    def _check_nbar(cls, v):
        _finite(v, 'nbar')
        if v <= 0.0:
            raise ValueError("mean photon number nbar must be positive")
        return v

    @property
    def fock_index(self) -> float:
        return self.nbar / self.nu**2

    @property
    def integer_fock(self) -> bool:
        index = self.fock_index
        return abs(index - round(index)) < INTEGER_FOCK_TOLERANCE

    @property
    def amplitude(self) -> float:
        """nu*sqrt(1-nu^2): half the swing of P(+|phi) around 1/2."""
        return self.nu * math.sqrt(1.0 - self.nu**2)


class PhaseValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    phi: float

    @field_validator('phi')
    @classmethod
    def _check_phi(cls, v):
        return _finite(v, 'phase phi')


class PriorWindow(BaseModel):
    """Uniform prior 1/W on [0, W]."""
    model_config = ConfigDict(frozen=True)

    width: float

    @field_validator('width')
    @classmethod
    def _check_width(cls, v):
        _finite(v, 'prior width')
        if v <= 0.0:
            raise ValueError("prior width must be positive")
        return v

    def density(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.where((phi >= 0.0) & (phi <= self.width), 1.0 / self.width, 0.0)


class ConditionDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True)

    c1: float
    c2: float
    mnu2: float
    c1_ok: bool
    c2_ok: bool

    @model_validator(mode='after')
    def _check_consistency(self):
        if min(self.c1, self.c2, self.mnu2) <= 0.0:
            raise ValueError("condition ratios must be strictly positive")
        implied = self.c2**2 / self.c1**2
        if abs(implied - self.mnu2) > 1e-9 * self.mnu2:
            raise ValueError(f"m*nu^2={self.mnu2} inconsistent with (c2/c1)^2={implied}")
        return self


# Likelihood / estimation

class OutcomeTally(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    m: int

    @model_validator(mode='after')
    def _check_range(self):
        if self.m < 1:
            raise ValueError("repetition count m must be at least 1")
        if not 0 <= self.k <= self.m:
            raise ValueError(f"tally k={self.k} outside [0, m={self.m}]")
        return self


class EstimateResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    phi_hat: float
    method: EstimatorMethod
    clamped: bool = False


class GridSpec(BaseModel):
    """Uniform estimator grid: `points` samples over center +/- half_width_sigmas*sigma."""
    model_config = ConfigDict(frozen=True)

    points: int = 4001
    half_width_sigmas: float = 8.0
    center: Optional[float] = None

    @field_validator('points')
    @classmethod
    def _check_points(cls, v):
        if v < 3:
            raise ValueError("grid needs at least 3 points")
        return v

    @field_validator('half_width_sigmas')
    @classmethod
    def _check_half_width(cls, v):
        if v <= 0.0:
            raise ValueError("grid half width must be positive")
        return v


class PosteriorCurve(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    density: np.ndarray
    mode: PosteriorMode
    inversion: EstimatorMethod
    normalization: float
    center: float
    sigma: float

    @model_validator(mode='after')
    def _check_arrays(self):
        if self.grid.shape != self.density.shape or self.grid.ndim != 1:
            raise ValueError("grid and density must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if np.any(self.density < 0.0):
            raise ValueError("density must be nonnegative")
        self.grid.setflags(write=False)
        self.density.setflags(write=False)
        return self


# Bounds

class BoundsReport(BaseModel):
    """All bounds as standard deviations (radians)."""
    model_config = ConfigDict(frozen=True)

    weak_scale: float
    strong_scale: float
    cr: float
    qcr: float
    zz_exact: float
    zz_closed: float
    zz_overlap_approx: float
    bcr: float
    fisher_average: float
    strong_limit_ratio: float
    diagnostics: ConditionDiagnostics
    quadrature_abs_error: float

    @model_validator(mode='after')
    def _check_ordering(self):
        if self.qcr > self.cr * (1.0 + 1e-12):
            raise ValueError("quantum Cramer-Rao bound exceeds the classical one")
        if self.strong_scale > self.weak_scale * (1.0 + 1e-15):
            raise ValueError("strong Heisenberg scale exceeds the weak one")
        return self

    def as_rows(self):
        rows = [
            ('weak_scale', self.weak_scale),
            ('strong_scale', self.strong_scale),
            ('cr', self.cr),
            ('qcr', self.qcr),
            ('zz_exact', self.zz_exact),
            ('zz_closed', self.zz_closed),
            ('zz_overlap_approx', self.zz_overlap_approx),
            ('bcr', self.bcr),
            ('fisher_average', self.fisher_average),
            ('strong_limit_ratio', self.strong_limit_ratio),
            ('quadrature_abs_error', self.quadrature_abs_error),
        ]
        d = self.diagnostics
        rows += [('c1', d.c1), ('c2', d.c2), ('mnu2', d.mnu2),
                 ('c1_ok', d.c1_ok), ('c2_ok', d.c2_ok)]
        return rows


# Monte Carlo

class CampaignConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    probe: ProbeSpec
    prior: PriorWindow
    m: int
    trials: int
    phi_policy: PhiPolicy = PhiPolicy.FIXED
    phi: Optional[float] = None
    method: EstimatorMethod = EstimatorMethod.LINEARIZED
    master_seed: int = 0
    workers: int = 1

    @model_validator(mode='after')
    def _check_config(self):
        if self.m < 1:
            raise ValueError("repetition count m must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not 0 <= self.master_seed <= UINT64_MAX:
            raise ValueError("master seed must be a 64-bit unsigned integer")
        if self.phi_policy == PhiPolicy.FIXED:
            if self.phi is None:
                raise ValueError("fixed phase policy needs a phase phi")
            if not 0.0 <= self.phi <= self.prior.width:
                raise ValueError(f"fixed phase {self.phi} outside prior window [0, {self.prior.width}]")
        return self


class TrialRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    phi_true: float
    k: int
    phi_hat: float
    error: float
    clamped: bool


class CampaignSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    trials: int
    mse: float
    mse_stderr: float
    bias: float
    bias_stderr: float
    rmse: float
    rmse_stderr: float
    clamp_fraction: float
    clamp_warning: bool
    comparisons: Dict[str, float] = Field(default_factory=dict)


# CLI

class OutputEntry(BaseModel):
    path: str
    sha256: str


class RunManifest(BaseModel):
    command: str
    parameters: Dict[str, object]
    master_seed: Optional[int] = None
    version: str
    outputs: List[OutputEntry] = Field(default_factory=list)
    duration_s: float = 0.0
