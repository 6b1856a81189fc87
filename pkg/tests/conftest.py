import numpy as np
import pytest

from seqmix import (
    GaussianMeanModel,
    exponential_rate_family,
    gaussian_delta,
    gaussian_kappa,
    optimal_mixing,
)

MEANS = (1.0, 2.0, 3.0)


@pytest.fixture(scope="session")
def gauss_model():
    return GaussianMeanModel(means=MEANS)


@pytest.fixture(scope="session")
def series_values():
    """(kappa, delta) vectors for means 1, 2, 3 at tight tolerance."""
    kap = np.array([gaussian_kappa(m, tol=1e-10) for m in MEANS])
    dl = np.array([gaussian_delta(m, tol=1e-10) for m in MEANS])
    return kap, dl


@pytest.fixture(scope="session")
def p_opt(series_values):
    kap, _ = series_values
    return optimal_mixing(kap)


@pytest.fixture(scope="session")
def exp_family():
    return exponential_rate_family()
