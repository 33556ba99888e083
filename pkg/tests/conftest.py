"""
Shared fixtures: the two reference scenarios and an isolated output directory.
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from schemas import PriorWindow, ProbeSpec  # noqa: E402


@pytest.fixture
def fig1():
    """W=1e-3, nbar=1, m=1e6, nu=0.1, phi=1e-4: both closed-form conditions hold."""
    return ProbeSpec(nu=0.1, nbar=1.0), PriorWindow(width=1e-3), 1_000_000


@pytest.fixture
def fig2():
    """m=1.6e4, nu=0.03: close to the strong limit, conditions marginal."""
    return ProbeSpec(nu=0.03, nbar=1.0), PriorWindow(width=1e-3), 16_000


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.delenv('PHASE_BENCH_OUTPUT_DIR', raising=False)
    return tmp_path / 'out'
