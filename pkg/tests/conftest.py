import os

import hypothesis
import pytest

from nicholson.model import ModelParams, derive_constants
from nicholson.profile import GridSpec

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def reference_params():
    return ModelParams(delta=1.0, harvest=2.0, rho=6.0, sigma=0.15, r=1.8)


@pytest.fixture(scope="session")
def reference_consts(reference_params):
    """Pinned reference constants: beta and lambda pinned, eps = 0.33, alpha = 0.5."""
    return derive_constants(reference_params, beta=6.7093, epsilon=0.33, alpha=0.5,
                            t0=-1.0, lam=0.3420)


@pytest.fixture(scope="session")
def certified_consts(reference_params):
    """Pipeline defaults: beta = mu0, eps mid-window, alpha = 0.9 min(bound, cap)."""
    return derive_constants(reference_params)


@pytest.fixture(scope="session")
def reference_grid():
    return GridSpec(t_min=-30.0, t_max=20.0, h=0.01)


@pytest.fixture(scope="session")
def converged(reference_params, certified_consts, reference_grid):
    from nicholson.iterate import iterate
    return iterate(reference_params, certified_consts, reference_grid, tol=1e-8, max_iter=500,
                   exponential_checks=True)
