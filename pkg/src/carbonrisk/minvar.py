"""Minimum-variance portfolio construction under factor covariance models.

Closed forms: the unconstrained minimum-variance weight of asset i is

    x_i = var(x) / idio_var_i * (1 - beta_mkt_i / beta_star - beta_bmg_i / gamma_star)

with scalar thresholds (beta_star, gamma_star) computed from precision-
weighted sums of the betas.  Long-only variants share the same structure but
the thresholds become endogenous: they must be evaluated on the support of
the optimal portfolio.  We therefore solve the bounded QP first, read off the
support, compute the thresholds on it, and verify that the closed form
reproduces the optimizer's weights.

Constrained variants (carbon-beta cap, intensity exclusion) are QP-only and
report the carbon constraint's Lagrange multiplier, which doubles as the
shrinkage intensity of the equivalent unconstrained problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    EmptyUniverseError,
    EstimationError,
    InsufficientDataError,
    ValidationError,
)
from .linalg import FactorCovarianceModel
from .qp import QpProblem, QpSolution, solve_qp
from .validation import as_vector, check_nonnegative

__all__ = [
    "TwoFactorThresholds",
    "MinVarResult",
    "gmv_capm",
    "mv_capm_long_only",
    "gmv_two_factor",
    "mv_two_factor_long_only",
    "mv_carbon_constrained",
    "shrunk_covariance",
    "waci",
    "mv_with_intensity_exclusion",
    "MinimumVariance",
]

# An asset belongs to the support when its weight exceeds this.
SUPPORT_TOL = 1e-8
_CONSISTENCY_TOL = 1e-6


@dataclass(frozen=True)
class TwoFactorThresholds:
    """Scalar thresholds of the minimum-variance weight formula.

    ``support`` is the tuple of asset positions the thresholds were computed
    on (the whole universe for unconstrained portfolios).
    """

    beta_star: float
    gamma_star: float
    support: tuple[int, ...]


@dataclass
class MinVarResult:
    weights: np.ndarray
    beta_star: float
    gamma_star: float | None
    variance: float
    support: tuple[int, ...]
    lambda_bmg: float | None = None
    lambda_budget: float | None = None
    qp: QpSolution | None = None

    @property
    def thresholds(self) -> TwoFactorThresholds:
        gamma = np.inf if self.gamma_star is None else self.gamma_star
        return TwoFactorThresholds(self.beta_star, gamma, self.support)


def _closed_form(beta, gamma, iv, var_mkt, var_bmg):
    """Unconstrained minimum-variance weights plus thresholds.

    Works for the single-factor case with ``gamma=None`` (treated as a zero
    carbon loading with zero factor variance).  Returns
    (weights, beta_star, gamma_star, variance); gamma_star is +/-inf when
    the carbon term vanishes.
    """
    if gamma is None:
        gamma = np.zeros_like(beta)
        var_bmg = 0.0
    beta_t = beta / iv
    gamma_t = gamma / iv
    p_bb = float(beta_t @ beta)
    p_gg = float(gamma_t @ gamma)
    p_bg = float(beta_t @ gamma)
    w0 = 1.0 + var_mkt * p_bb + var_bmg * p_gg + var_mkt * var_bmg * (p_bb * p_gg - p_bg**2)
    w1 = var_mkt * (1.0 + var_bmg * p_gg) / w0
    w2 = var_bmg * (1.0 + var_mkt * p_bb) / w0
    w3 = var_mkt * var_bmg * p_bg / w0
    sum_bt = float(beta_t.sum())
    sum_gt = float(gamma_t.sum())
    wt1 = w1 * sum_bt - w3 * sum_gt
    wt2 = w2 * sum_gt - w3 * sum_bt
    # Sigma^-1 1 written in the (xi, beta_t, gamma_t) basis:
    inv_one = 1.0 / iv - wt1 * beta_t - wt2 * gamma_t
    total = float(inv_one.sum())
    if total <= 0:
        raise EstimationError("non-positive 1' Sigma^-1 1; covariance inputs corrupt")
    variance = 1.0 / total
    weights = variance * inv_one
    beta_star = np.inf if wt1 == 0 else 1.0 / wt1
    gamma_star = np.inf if wt2 == 0 else 1.0 / wt2
    return weights, beta_star, gamma_star, variance


def _long_only_qp(model: FactorCovarianceModel, warm_start=None) -> QpSolution:
    n = model.n_assets
    prob = QpProblem(
        Q=model.matrix(),
        c=np.zeros(n),
        A=np.ones((1, n)),
        b=np.array([1.0]),
        lb=np.zeros(n),
    )
    sol = solve_qp(prob, warm_start=warm_start)
    if sol.status != "optimal":
        raise EstimationError(f"long-only QP did not converge: {sol.message}")
    return sol


def _verify_support_consistency(weights, cf_weights, where):
    if np.max(np.abs(weights - cf_weights)) > _CONSISTENCY_TOL:
        raise EstimationError(
            f"{where}: closed-form weights disagree with optimizer "
            f"(max diff {np.max(np.abs(weights - cf_weights)):.2e})"
        )


def gmv_capm(model: FactorCovarianceModel) -> MinVarResult:
    """Unconstrained minimum variance under the single-factor covariance."""
    if model.n_assets < 2:
        raise InsufficientDataError("need at least 2 assets")
    weights, beta_star, _, variance = _closed_form(
        model.beta_mkt, None, model.idio_var, model.sigma_mkt**2, 0.0
    )
    return MinVarResult(
        weights=weights,
        beta_star=beta_star,
        gamma_star=None,
        variance=variance,
        support=tuple(range(model.n_assets)),
    )


def gmv_two_factor(model: FactorCovarianceModel) -> MinVarResult:
    """Unconstrained minimum variance under the two-factor covariance."""
    if model.n_assets < 3:
        raise InsufficientDataError("need at least 3 assets")
    if not model.has_bmg:
        raise ValidationError("model has no carbon betas; use gmv_capm")
    weights, beta_star, gamma_star, variance = _closed_form(
        model.beta_mkt,
        model.beta_bmg,
        model.idio_var,
        model.sigma_mkt**2,
        model.sigma_bmg**2,
    )
    return MinVarResult(
        weights=weights,
        beta_star=beta_star,
        gamma_star=gamma_star,
        variance=variance,
        support=tuple(range(model.n_assets)),
    )


def _long_only(model: FactorCovarianceModel, two_factor: bool) -> MinVarResult:
    sol = _long_only_qp(model)
    support = np.where(sol.x > SUPPORT_TOL)[0]
    sub = model.restrict(support)
    gamma = sub.beta_bmg if two_factor else None
    var_bmg = sub.sigma_bmg**2 if two_factor else 0.0
    sub_weights, beta_star, gamma_star, variance = _closed_form(
        sub.beta_mkt, gamma, sub.idio_var, sub.sigma_mkt**2, var_bmg
    )
    cf = np.zeros(model.n_assets)
    cf[support] = sub_weights
    _verify_support_consistency(sol.x, cf, "long-only minimum variance")
    return MinVarResult(
        weights=cf,
        beta_star=beta_star,
        gamma_star=gamma_star if two_factor else None,
        variance=variance,
        support=tuple(int(i) for i in support),
        lambda_budget=float(sol.eq_multipliers[0]),
        qp=sol,
    )


def mv_capm_long_only(model: FactorCovarianceModel) -> MinVarResult:
    """Long-only minimum variance, single-factor covariance.

    Assets with a market beta above the endogenous threshold are excluded.
    """
    if model.n_assets < 2:
        raise InsufficientDataError("need at least 2 assets")
    return _long_only(model.capm_only(), two_factor=False)


def mv_two_factor_long_only(model: FactorCovarianceModel) -> MinVarResult:
    """Long-only minimum variance, two-factor covariance.

    Included assets satisfy beta_i/beta_star + gamma_i/gamma_star <= 1 with
    thresholds evaluated on the optimizer's support.
    """
    if model.n_assets < 3:
        raise InsufficientDataError("need at least 3 assets")
    if not model.has_bmg:
        raise ValidationError("model has no carbon betas; use mv_capm_long_only")
    return _long_only(model, two_factor=True)


def mv_carbon_constrained(
    model: FactorCovarianceModel,
    beta_plus: float,
    warm_start=None,
) -> MinVarResult:
    """Long-only minimum variance with the carbon cap beta_bmg' x <= beta_plus.

    The cap's Lagrange multiplier ``lambda_bmg`` is reported in the variance
    units of the covariance inputs; it is also the shrinkage intensity that
    makes the unconstrained problem on ``shrunk_covariance(model, lambda_bmg)``
    equivalent to this constrained one.
    """
    if not model.has_bmg:
        raise ValidationError("carbon-constrained optimization needs beta_bmg")
    n = model.n_assets
    prob = QpProblem(
        Q=model.matrix(),
        c=np.zeros(n),
        A=np.ones((1, n)),
        b=np.array([1.0]),
        G=model.beta_bmg.reshape(1, -1),
        h=np.array([float(beta_plus)]),
        lb=np.zeros(n),
    )
    sol = solve_qp(prob, warm_start=warm_start)
    if sol.status != "optimal":
        raise EstimationError(f"constrained MV QP did not converge: {sol.message}")
    x = sol.x
    return MinVarResult(
        weights=x,
        beta_star=np.nan,
        gamma_star=None,
        variance=float(x @ model.matrix() @ x),
        support=tuple(int(i) for i in np.where(x > SUPPORT_TOL)[0]),
        lambda_bmg=float(sol.ineq_multipliers[0]),
        lambda_budget=float(sol.eq_multipliers[0]),
        qp=sol,
    )


def shrunk_covariance(model: FactorCovarianceModel, lambda_bmg: float) -> np.ndarray:
    """Covariance shrinkage equivalent of the carbon cap:
    Sigma + lambda * (beta_bmg 1' + 1 beta_bmg')."""
    if lambda_bmg < 0:
        raise ValidationError("lambda_bmg must be nonnegative")
    if not model.has_bmg:
        raise ValidationError("model has no carbon betas")
    ones = np.ones(model.n_assets)
    return model.matrix() + lambda_bmg * (
        np.outer(model.beta_bmg, ones) + np.outer(ones, model.beta_bmg)
    )


def waci(weights, intensities) -> float:
    """Weighted average carbon intensity of a portfolio (tCO2e / $M revenue)."""
    w = as_vector(weights, "weights")
    ci = check_nonnegative(intensities, "intensities")
    if len(w) != len(ci):
        raise ValidationError("weights and intensities lengths differ")
    return float(w @ ci)


def mv_with_intensity_exclusion(
    model: FactorCovarianceModel,
    beta_plus: float,
    ci_plus: float,
    intensities,
) -> MinVarResult:
    """Carbon-constrained MV after excluding assets above the intensity cap.

    Assets with intensity above ``ci_plus`` get zero weight; the carbon-beta
    constrained problem is then solved on the survivors.
    """
    ci = check_nonnegative(intensities, "intensities")
    if len(ci) != model.n_assets:
        raise ValidationError("intensities length differs from model")
    keep = np.where(ci <= ci_plus)[0]
    if len(keep) == 0:
        raise EmptyUniverseError(
            f"intensity cap {ci_plus} excludes every asset"
        )
    sub = model.restrict(keep)
    if np.isinf(beta_plus):
        sub_result = _long_only(sub, two_factor=sub.has_bmg)
        sub_result.lambda_bmg = 0.0
    else:
        sub_result = mv_carbon_constrained(sub, beta_plus)
    weights = np.zeros(model.n_assets)
    weights[keep] = sub_result.weights
    return MinVarResult(
        weights=weights,
        beta_star=np.nan,
        gamma_star=None,
        variance=sub_result.variance,
        support=tuple(int(keep[i]) for i in sub_result.support),
        lambda_bmg=sub_result.lambda_bmg,
        lambda_budget=sub_result.lambda_budget,
        qp=sub_result.qp,
    )


class MinimumVariance(BaseEstimator):
    """Minimum-variance portfolio estimator.

    Parameters
    ----------
    long_only : bool, default True
        Restrict weights to be nonnegative.
    beta_cap : float, optional
        Maximum portfolio carbon beta (adds ``beta_bmg' x <= beta_cap``;
        implies long-only).
    intensity_cap : float, optional
        Exclude assets whose carbon intensity exceeds this value before
        optimizing (requires ``intensities`` at fit time and ``beta_cap``).

    Attributes
    ----------
    weights_ : ndarray of optimal weights.
    beta_star_, gamma_star_ : threshold values (closed-form solvers only).
    lambda_bmg_ : carbon constraint multiplier (constrained solver only).
    variance_ : portfolio return variance.
    waci_ : weighted average carbon intensity, when intensities are given.
    """

    def __init__(self, long_only=True, beta_cap=None, intensity_cap=None):
        self.long_only = long_only
        self.beta_cap = beta_cap
        self.intensity_cap = intensity_cap

    def fit(self, model: FactorCovarianceModel, intensities=None):
        if self.intensity_cap is not None:
            if intensities is None:
                raise ValidationError("intensity_cap requires intensities")
            cap = np.inf if self.beta_cap is None else self.beta_cap
            result = mv_with_intensity_exclusion(
                model, cap, self.intensity_cap, intensities
            )
        elif self.beta_cap is not None:
            result = mv_carbon_constrained(model, self.beta_cap)
        elif self.long_only:
            result = (
                mv_two_factor_long_only(model)
                if model.has_bmg
                else mv_capm_long_only(model)
            )
        else:
            result = gmv_two_factor(model) if model.has_bmg else gmv_capm(model)
        self.result_ = result
        self.weights_ = result.weights
        self.beta_star_ = result.beta_star
        self.gamma_star_ = result.gamma_star
        self.lambda_bmg_ = result.lambda_bmg
        self.variance_ = result.variance
        self.support_ = result.support
        self.waci_ = None if intensities is None else waci(result.weights, intensities)
        return self
