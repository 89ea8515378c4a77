import numpy as np
import pytest

from carbonrisk.linalg import FactorCovarianceModel

# Worked 5-asset universe shared by the portfolio test modules.  Three carbon
# loading variants exercise positive, negative, and sign-flipped thresholds.
BETA_MKT = np.array([0.9, 0.8, 1.2, 0.7, 1.3])
IDIO_VOL = np.array([0.04, 0.12, 0.05, 0.08, 0.05])
SIGMA_MKT = 0.25
SIGMA_BMG = 0.10
BETA_BMG_1 = np.array([-0.5, 0.7, 0.2, 0.9, -0.3])
BETA_BMG_2 = np.array([-1.5, -0.5, 3.0, -1.2, -0.9])
BETA_BMG_3 = -BETA_BMG_2


def _model(beta_bmg):
    return FactorCovarianceModel(
        beta_mkt=BETA_MKT,
        idio_var=IDIO_VOL**2,
        sigma_mkt=SIGMA_MKT,
        beta_bmg=beta_bmg,
        sigma_bmg=SIGMA_BMG,
    )


@pytest.fixture
def model_set1():
    return _model(BETA_BMG_1)


@pytest.fixture
def model_set2():
    return _model(BETA_BMG_2)


@pytest.fixture
def model_set3():
    return _model(BETA_BMG_3)


def random_model(rng, n, with_bmg=True):
    """Random two-factor universe for property tests."""
    return FactorCovarianceModel(
        beta_mkt=rng.normal(1.0, 0.3, n),
        idio_var=rng.uniform(0.02, 0.15, n) ** 2,
        sigma_mkt=rng.uniform(0.1, 0.3),
        beta_bmg=rng.normal(0.0, 1.0, n) if with_bmg else None,
        sigma_bmg=rng.uniform(0.05, 0.15) if with_bmg else None,
    )
