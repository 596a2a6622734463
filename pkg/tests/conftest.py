import numpy as np
import pytest

from heisenmix.core.fracsublap import OperatorParams, QuadratureSpec
from heisenmix.core.hgroup import GaugeBall, GroupPoint
from heisenmix.core.solver import solver_quadrature


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    return OperatorParams(alpha=1.0, beta=1.0, lam=1.0, Lam=2.0, s=0.5)


@pytest.fixture
def spec():
    """Moderate rule: accurate to about 1e-4 on smooth bounded functions"""
    return QuadratureSpec(tail_tolerance=1e-4)


@pytest.fixture
def coarse_spec(params):
    return solver_quadrature(params)


@pytest.fixture
def unit_ball():
    return GaugeBall(GroupPoint.origin(), 1.0)


@pytest.fixture(autouse=True)
def _no_env_overrides(monkeypatch):
    monkeypatch.delenv("HEISENMIX_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("HEISENMIX_THREADS", raising=False)
