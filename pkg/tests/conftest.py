import numpy as np
import pytest

from specwave import DampingParams, HermiteSpec, TorusSpec, build_harmonic_oscillator, build_torus


@pytest.fixture(scope="session")
def hermite16():
    return build_harmonic_oscillator(HermiteSpec(max_degree=15))


@pytest.fixture(scope="session")
def hermite32():
    return build_harmonic_oscillator(HermiteSpec(max_degree=31))


@pytest.fixture(scope="session")
def hermite2d():
    return build_harmonic_oscillator(HermiteSpec(dimension=2, max_degree=5))


@pytest.fixture(scope="session")
def torus1d():
    return build_torus(TorusSpec(max_frequency=8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def params_under():
    return DampingParams(b=1.0, m=0.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    results = {}
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and hasattr(mod, "RESULTS"):
            results.update(mod.RESULTS)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
