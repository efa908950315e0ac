import pytest

from fcir import CirParams, HurstParameter


@pytest.fixture
def bench_params() -> CirParams:
    """Benchmark parameter set used across the experiments."""
    return CirParams(kappa=2.0, theta=0.5, sigma=0.5, r0=1.0)


@pytest.fixture
def hurst07() -> HurstParameter:
    return HurstParameter(0.7)
