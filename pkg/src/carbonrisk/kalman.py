"""Time-varying regression coefficients via the Kalman filter.

Observation and state equations:

    y(t) = x(t)' beta(t) + eps(t),        eps(t) ~ N(0, sigma_eps2)
    beta(t) = beta(t-1) + eta(t),         eta(t) ~ N(0, diag(state_variances))

The filter runs the standard predict/update recursion; the noise variances
are estimated by maximum likelihood in log space (so zero state variances are
approached smoothly through a floor), initialized from the static OLS fit.
Standard errors come from the numerical Hessian of the log-likelihood and
feed the significance tests for time variation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import EstimationError, InsufficientDataError, ValidationError
from .regression import OlsFit
from .validation import as_matrix, as_vector, check_symmetric

__all__ = [
    "StateSpaceConfig",
    "KalmanFit",
    "kalman_filter",
    "ols_implied_config",
    "MleResult",
    "mle_fit",
    "ForecastComparison",
    "forecast_error_compare",
    "aggregate_betas",
    "TimeVaryingBeta",
]

logger = logging.getLogger(__name__)

_LOG_FLOOR = -30.0  # variance floor exp(-30) for the log-parameterization
_DEFAULT_MIN_OBS = 36
DEFAULT_BURN_IN = 12


@dataclass(frozen=True)
class StateSpaceConfig:
    """Hyperparameters and initial conditions of the random-walk-beta model."""

    sigma_eps2: float
    state_variances: np.ndarray  # diagonal of the state noise covariance
    beta0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        if self.sigma_eps2 <= 0:
            raise ValidationError("sigma_eps2 must be > 0")
        sv = as_vector(self.state_variances, "state_variances")
        if np.any(sv < 0):
            raise ValidationError("state variances must be nonnegative")
        beta0 = as_vector(self.beta0, "beta0")
        p0 = check_symmetric(self.P0, "P0", tol=1e-9)
        if len(beta0) != len(sv) or p0.shape != (len(sv), len(sv)):
            raise ValidationError("state dimension mismatch in config")
        if np.min(np.linalg.eigvalsh(p0)) < -1e-10 * (1 + np.abs(p0).max()):
            raise ValidationError("P0 must be positive semidefinite")
        object.__setattr__(self, "state_variances", sv)
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "P0", p0)

    @property
    def n_states(self) -> int:
        return len(self.beta0)


@dataclass
class KalmanFit:
    """Filter output paths.

    ``beta_predicted[t]``/``cov_predicted[t]`` are the one-step-ahead state
    moments before seeing y(t); ``beta_filtered[t]``/``cov_filtered[t]`` the
    moments after the update.  ``predictions[t]`` is the one-step-ahead
    forecast of y(t).
    """

    beta_filtered: np.ndarray
    beta_predicted: np.ndarray
    cov_filtered: np.ndarray
    cov_predicted: np.ndarray
    innovations: np.ndarray
    innovation_variances: np.ndarray
    predictions: np.ndarray
    loglik: float

    @property
    def terminal_state(self) -> np.ndarray:
        return self.beta_filtered[-1]


def _validate_filter_inputs(y, x):
    y = as_vector(y, "y")
    x = as_matrix(x, "x")
    if x.shape[0] != len(y):
        raise ValidationError("y and x have different numbers of observations")
    return y, x


def kalman_filter(y, x, cfg: StateSpaceConfig) -> KalmanFit:
    """Run the random-walk-coefficient filter over (y, x).

    ``x`` carries the full regressor rows including the leading 1 for the
    intercept.  The log-likelihood accumulates the Gaussian log-density of
    each innovation at its predicted variance.
    """
    y, x = _validate_filter_inputs(y, x)
    m = cfg.n_states
    if x.shape[1] != m:
        raise ValidationError(f"x has {x.shape[1]} columns, config expects {m}")
    t_len = len(y)
    sigma_eps2 = cfg.sigma_eps2
    q_diag = cfg.state_variances

    beta_f = np.empty((t_len, m))
    beta_p = np.empty((t_len, m))
    cov_f = np.empty((t_len, m, m))
    cov_p = np.empty((t_len, m, m))
    v_arr = np.empty(t_len)
    f_arr = np.empty(t_len)
    yhat = np.empty(t_len)

    beta = cfg.beta0.copy()
    p = cfg.P0.copy()
    loglik = 0.0
    log2pi = math.log(2.0 * math.pi)
    for t in range(t_len):
        # predict: random-walk transition
        p = p.copy()
        p[np.diag_indices_from(p)] += q_diag
        xt = x[t]
        beta_p[t] = beta
        cov_p[t] = p
        px = p @ xt
        f = float(xt @ px) + sigma_eps2
        if f <= 0:
            raise EstimationError(f"non-positive innovation variance at t={t}")
        yhat[t] = float(xt @ beta)
        v = y[t] - yhat[t]
        # update: symmetric rank-1 downdate keeps P PSD
        beta = beta + px * (v / f)
        p = p - np.outer(px, px) / f
        p = 0.5 * (p + p.T)
        beta_f[t] = beta
        cov_f[t] = p
        v_arr[t] = v
        f_arr[t] = f
        loglik -= 0.5 * (log2pi + math.log(f) + v * v / f)

    return KalmanFit(
        beta_filtered=beta_f,
        beta_predicted=beta_p,
        cov_filtered=cov_f,
        cov_predicted=cov_p,
        innovations=v_arr,
        innovation_variances=f_arr,
        predictions=yhat,
        loglik=float(loglik),
    )


def _loglik_only(y, x, sigma_eps2, q_diag, beta0, p0) -> float:
    """Log-likelihood without storing paths (hot loop of the MLE)."""
    t_len = len(y)
    beta = beta0.copy()
    p = p0.copy()
    loglik = -0.5 * t_len * math.log(2.0 * math.pi)
    diag_idx = np.diag_indices_from(p)
    for t in range(t_len):
        p[diag_idx] += q_diag
        xt = x[t]
        px = p @ xt
        f = float(xt @ px) + sigma_eps2
        if f <= 0:
            return -np.inf
        v = y[t] - float(xt @ beta)
        beta = beta + px * (v / f)
        p -= np.outer(px, px) / f
        loglik -= 0.5 * (math.log(f) + v * v / f)
    return loglik


def ols_implied_config(y, x, state_variances=None, sigma_eps2=None) -> StateSpaceConfig:
    """Initial conditions from the static regression of y on x.

    ``beta0`` is the OLS coefficient vector and ``P0`` its sampling
    covariance ``sigma2 (X'X)^-1``; a rank-deficient design falls back to
    ``P0 = 10 I``.  Unspecified noise variances default to the OLS residual
    variance (observation) and that variance divided by the sample length
    (state).
    """
    y, x = _validate_filter_inputs(y, x)
    t_len, m = x.shape
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(t_len - m, 1)
    sigma2 = float(resid @ resid) / dof
    if rank < m:
        p0 = 10.0 * np.eye(m)
    else:
        p0 = sigma2 * np.linalg.inv(x.T @ x)
        p0 = 0.5 * (p0 + p0.T)
    if sigma2 <= 1e-18 * (1.0 + float(np.mean(y**2))):
        raise EstimationError("degenerate data: zero OLS residual variance")
    if sigma_eps2 is None:
        sigma_eps2 = sigma2
    if state_variances is None:
        state_variances = np.full(m, sigma2 / t_len)
    return StateSpaceConfig(
        sigma_eps2=float(sigma_eps2),
        state_variances=np.asarray(state_variances, dtype=float),
        beta0=coef,
        P0=p0,
    )


class MleResult(NamedTuple):
    config: StateSpaceConfig
    loglik: float
    start_loglik: float
    std_errors: np.ndarray  # for (sigma_eps2, state_variances...)
    t_stats: np.ndarray
    converged: bool
    n_iter: int


def _hessian_std_errors(fun, theta):
    """SEs from the central-difference Hessian of a log-likelihood.

    Steps never cross zero, so parameters pinned at the variance floor stay
    inside the domain; flat curvature there yields NaN standard errors,
    which downstream significance tests treat as insignificant.
    """
    k = len(theta)
    hess = np.empty((k, k))
    steps = np.minimum(np.maximum(1e-4 * np.abs(theta), 1e-16), 0.5 * np.abs(theta))
    steps = np.maximum(steps, 1e-18)
    f0 = fun(theta)
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = steps[i]
            ej[j] = steps[j]
            if i == j:
                val = (fun(theta + ei) - 2 * f0 + fun(theta - ei)) / steps[i] ** 2
            else:
                val = (
                    fun(theta + ei + ej)
                    - fun(theta + ei - ej)
                    - fun(theta - ei + ej)
                    + fun(theta - ei - ej)
                ) / (4 * steps[i] * steps[j])
            hess[i, j] = hess[j, i] = val if np.isfinite(val) else 0.0
    se = np.full(k, np.nan)
    try:
        cov = np.linalg.inv(-hess)
        diag = np.diag(cov)
        se = np.where(diag > 0, np.sqrt(np.abs(diag)), np.nan)
    except np.linalg.LinAlgError:
        pass
    return se


def mle_fit(y, x, min_obs: int = _DEFAULT_MIN_OBS, max_iter: int = 200) -> MleResult:
    """Maximum-likelihood estimation of the noise hyperparameters.

    theta = (sigma_eps2, state variance diagonal), optimized in log space so
    positivity is smooth; entries can reach an effective zero at the
    ``exp(-30)`` floor.  The returned log-likelihood never falls below the
    OLS-implied starting point.  Standard errors are asymptotic, from the
    numerical Hessian in the variance parameterization.
    """
    y, x = _validate_filter_inputs(y, x)
    if len(y) < min_obs:
        raise InsufficientDataError(f"need at least {min_obs} observations")
    start_cfg = ols_implied_config(y, x)
    m = x.shape[1]
    beta0, p0 = start_cfg.beta0, start_cfg.P0

    def neg_loglik_log(theta_log):
        theta = np.exp(np.clip(theta_log, _LOG_FLOOR, 50.0))
        return -_loglik_only(y, x, float(theta[0]), theta[1:], beta0, p0)

    theta0_log = np.log(
        np.concatenate([[start_cfg.sigma_eps2], start_cfg.state_variances])
    )
    theta0_log = np.clip(theta0_log, _LOG_FLOOR, 50.0)
    start_ll = -neg_loglik_log(theta0_log)

    res = minimize(
        neg_loglik_log,
        theta0_log,
        method="L-BFGS-B",
        bounds=[(_LOG_FLOOR, 50.0)] * (m + 1),
        options={"maxiter": max_iter},
    )
    if -res.fun >= start_ll:
        theta_log = res.x
        loglik = -float(res.fun)
    else:
        theta_log = theta0_log
        loglik = start_ll
        logger.warning("MLE failed to improve on the OLS-implied start")
    theta = np.exp(np.clip(theta_log, _LOG_FLOOR, 50.0))

    def loglik_in_variance(theta_var):
        if np.any(theta_var <= 0):
            return -np.inf
        return _loglik_only(y, x, float(theta_var[0]), theta_var[1:], beta0, p0)

    se = _hessian_std_errors(loglik_in_variance, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = theta / se
    config = StateSpaceConfig(
        sigma_eps2=float(theta[0]),
        state_variances=theta[1:],
        beta0=beta0,
        P0=p0,
    )
    return MleResult(
        config=config,
        loglik=loglik,
        start_loglik=float(start_ll),
        std_errors=se,
        t_stats=np.asarray(t_stats),
        converged=bool(res.success),
        n_iter=int(res.nit),
    )


class ForecastComparison(NamedTuple):
    mae_ols: float
    rmse_ols: float
    mae_ssm: float
    rmse_ssm: float


def forecast_error_compare(
    y,
    x,
    olsfit: OlsFit,
    ssmfit: KalmanFit,
    burn_in: int = DEFAULT_BURN_IN,
) -> ForecastComparison:
    """Forecast-error metrics of the static versus time-varying model.

    The state-space errors use one-step-ahead predictions; the OLS errors
    use in-sample fitted values from the full-sample fit.  The first
    ``burn_in`` observations are excluded from both to damp initialization
    transients.
    """
    y = as_vector(y, "y")
    if len(olsfit.fitted) != len(y) or len(ssmfit.predictions) != len(y):
        raise ValidationError("fits were not computed on this sample")
    if burn_in >= len(y):
        raise ValidationError("burn-in exceeds the sample")
    sl = slice(burn_in, None)
    err_ols = y[sl] - olsfit.fitted[sl]
    err_ssm = y[sl] - ssmfit.predictions[sl]
    return ForecastComparison(
        mae_ols=float(np.mean(np.abs(err_ols))),
        rmse_ols=float(np.sqrt(np.mean(err_ols**2))),
        mae_ssm=float(np.mean(np.abs(err_ssm))),
        rmse_ssm=float(np.sqrt(np.mean(err_ssm**2))),
    )


def aggregate_betas(beta_paths: pd.DataFrame, groups, mode: str = "mean") -> pd.DataFrame:
    """Aggregate per-asset carbon-beta paths into group paths.

    ``beta_paths`` is dates x assets; ``groups`` maps asset to group label.
    Modes: ``mean``, ``mean-absolute`` (absolute value before averaging),
    ``median``.  Groups without any mapped asset are skipped with a warning.
    """
    if mode not in ("mean", "mean-absolute", "median"):
        raise ValidationError(f"unknown aggregation mode {mode!r}")
    groups = dict(groups)
    labels = sorted({g for g in groups.values()}, key=str)
    out = {}
    for label in labels:
        members = [a for a, g in groups.items() if g == label and a in beta_paths.columns]
        if not members:
            logger.warning("group %s has no assets with beta paths; skipped", label)
            continue
        block = beta_paths[members]
        if mode == "mean":
            out[label] = block.mean(axis=1)
        elif mode == "mean-absolute":
            out[label] = block.abs().mean(axis=1)
        else:
            out[label] = block.median(axis=1)
    return pd.DataFrame(out)


class TimeVaryingBeta(BaseEstimator):
    """Random-walk-coefficient regression estimated by Kalman filtering.

    ``fit(X, y)`` expects ``X`` without an intercept column (one is added as
    the first state) and estimates the noise hyperparameters by maximum
    likelihood before running the filter.

    Attributes
    ----------
    config_ : fitted :class:`StateSpaceConfig`.
    filter_ : :class:`KalmanFit` with the state paths.
    beta_path_ : filtered coefficients, one row per observation
        (intercept first).
    loglik_, std_errors_, t_stats_ : estimation diagnostics.
    """

    def __init__(self, min_obs: int = _DEFAULT_MIN_OBS, max_iter: int = 200):
        self.min_obs = min_obs
        self.max_iter = max_iter

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(y, dtype=float)
        design = np.column_stack([np.ones(len(y)), X])
        mle = mle_fit(y, design, min_obs=self.min_obs, max_iter=self.max_iter)
        self.mle_ = mle
        self.config_ = mle.config
        self.filter_ = kalman_filter(y, design, mle.config)
        self.beta_path_ = self.filter_.beta_filtered
        self.loglik_ = self.filter_.loglik
        self.std_errors_ = mle.std_errors
        self.t_stats_ = mle.t_stats
        return self

    def predict(self, X):
        """Forecast with the terminal filtered coefficients."""
        if not hasattr(self, "filter_"):
            raise NotFittedError("TimeVaryingBeta instance is not fitted yet")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        design = np.column_stack([np.ones(len(X)), X])
        return design @ self.filter_.terminal_state
