import numpy as np
import pytest

from bifurkit.model import ModelParams


@pytest.fixture
def base_params():
    """The fixed rates used throughout the numerical study."""
    return dict(alpha=0.2, gamma=0.3, eta=0.02)


@pytest.fixture
def fig21b_params(base_params):
    return ModelParams(beta=2.5, rho=0.25, **base_params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_simplex_points(rng, n):
    """Uniform points (S, I, R) with S + I + R <= 1."""
    pts = rng.dirichlet((1.0, 1.0, 1.0, 1.0), size=n)
    return pts[:, :3]


def random_valid_params(rng, n, beta_range=(0.05, 8.0)):
    """Random parameter sets respecting gamma >= alpha and rho in (0, 1)."""
    out = []
    while len(out) < n:
        beta = rng.uniform(*beta_range)
        rho = rng.uniform(0.005, 0.995)
        alpha = rng.uniform(0.02, 1.0)
        gamma = alpha * rng.uniform(1.0, 4.0)
        eta = rng.uniform(0.005, 1.0)
        out.append(ModelParams(beta=beta, rho=rho, alpha=alpha, gamma=gamma, eta=eta))
    return out
