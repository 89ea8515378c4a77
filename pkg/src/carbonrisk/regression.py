"""Static multi-factor regressions and factor-level statistics.

Per-asset OLS fits against named factor sets, nested-model F-tests with
per-universe aggregation, factor correlation matrices with significance
stars, descriptive return statistics, and beta-sorted quintile portfolios.
Months where an asset is out of the index (missing returns) are dropped from
its sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .exceptions import CollinearityError, InsufficientDataError, ValidationError

__all__ = [
    "OlsFit",
    "ols_fit",
    "FTestResult",
    "f_test_nested",
    "batch_compare",
    "CorrelationResult",
    "factor_correlation",
    "DescriptiveStats",
    "descriptive_stats",
    "quintile_sort",
    "FactorOLS",
    "MODEL_SPECS",
]

logger = logging.getLogger(__name__)

DEFAULT_MIN_OBS = 36  # three years of monthly data

# Named factor sets used throughout: the market model, the three-factor
# model, their carbon-augmented versions, and the four-factor model.
MODEL_SPECS = {
    "CAPM": ("MKT",),
    "MKT+BMG": ("MKT", "BMG"),
    "FF": ("MKT", "SMB", "HML"),
    "FF+BMG": ("MKT", "SMB", "HML", "BMG"),
    "FF+WML": ("MKT", "SMB", "HML", "WML"),
    "4F": ("MKT", "SMB", "HML", "WML"),
    "4F+BMG": ("MKT", "SMB", "HML", "WML", "BMG"),
}


def _check_spec(spec) -> tuple[str, ...]:
    names = tuple(spec)
    if not names:
        raise ValidationError("factor spec must not be empty")
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate factors in spec: {names}")
    return names


@dataclass
class OlsFit:
    """Least-squares fit of one asset on a factor set (intercept included)."""

    alpha: float
    betas: dict[str, float]
    residual_variance: float
    adjusted_r2: float
    n_obs: int
    std_errors: dict[str, float]
    rss: float
    factor_names: tuple[str, ...]
    fitted: np.ndarray
    residuals: np.ndarray

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)


def _align_asset(asset_returns, factors: pd.DataFrame, names):
    missing = [n for n in names if n not in factors.columns]
    if missing:
        raise ValidationError(f"factors missing from series: {missing}")
    x = factors[list(names)]
    if isinstance(asset_returns, pd.Series):
        common = asset_returns.dropna().index.intersection(x.dropna().index)
        y = asset_returns.loc[common].to_numpy(dtype=float)
        xm = x.loc[common].to_numpy(dtype=float)
    else:
        y = np.asarray(asset_returns, dtype=float)
        xm = x.to_numpy(dtype=float)
        if len(y) != len(xm):
            raise ValidationError("returns and factors lengths differ")
        keep = np.isfinite(y) & np.all(np.isfinite(xm), axis=1)
        y, xm = y[keep], xm[keep]
    return y, xm


def ols_fit(
    asset_returns,
    factors: pd.DataFrame,
    spec,
    min_obs: int = DEFAULT_MIN_OBS,
) -> OlsFit:
    """Fit one asset's returns on the named factors by least squares.

    Index-aware inputs are aligned on their common non-missing dates.
    Raises :class:`InsufficientDataError` below ``min_obs`` overlapping
    months and :class:`CollinearityError` on a rank-deficient design.
    """
    names = _check_spec(spec)
    y, xm = _align_asset(asset_returns, factors, names)
    n = len(y)
    k = len(names)
    if n < max(min_obs, k + 2):
        raise InsufficientDataError(
            f"{n} overlapping observations; need at least {max(min_obs, k + 2)}"
        )
    design = np.column_stack([np.ones(n), xm])
    if np.linalg.matrix_rank(design) < k + 1:
        raise CollinearityError("rank-deficient design matrix")
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    resid = y - fitted
    rss = float(resid @ resid)
    dof = n - k - 1
    sigma2 = rss / dof
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if tss == 0 else 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    return OlsFit(
        alpha=float(coef[0]),
        betas={name: float(c) for name, c in zip(names, coef[1:])},
        residual_variance=sigma2,
        adjusted_r2=float(adj_r2),
        n_obs=n,
        std_errors={"alpha": float(se[0]), **{n_: float(s) for n_, s in zip(names, se[1:])}},
        rss=rss,
        factor_names=names,
        fitted=fitted,
        residuals=resid,
    )


class FTestResult(NamedTuple):
    statistic: float
    p_value: float
    df_num: int
    df_den: int


def f_test_nested(full: OlsFit, nested: OlsFit) -> FTestResult:
    """F-test of the nested model against the full model on the same sample."""
    if not set(nested.factor_names) < set(full.factor_names):
        raise ValidationError("nested factor set must be a strict subset")
    if nested.n_obs != full.n_obs:
        raise ValidationError(
            f"samples differ: {nested.n_obs} vs {full.n_obs} observations"
        )
    q = full.n_factors - nested.n_factors
    df_den = full.n_obs - full.n_factors - 1
    if full.rss <= 0:
        return FTestResult(np.inf, 0.0, q, df_den)
    f_stat = max((nested.rss - full.rss) / q, 0.0) / (full.rss / df_den)
    p = float(stats.f.sf(f_stat, q, df_den))
    return FTestResult(float(f_stat), p, q, df_den)


def batch_compare(
    panel: pd.DataFrame,
    factors: pd.DataFrame,
    pairs,
    min_obs: int = DEFAULT_MIN_OBS,
    levels=(0.10, 0.05, 0.01),
) -> pd.DataFrame:
    """Nested-vs-full comparison aggregated over all eligible assets.

    ``panel`` is dates x assets with NaN marking out-of-index months;
    ``pairs`` is a list of (nested_spec, full_spec) tuples.  Returns one row
    per pair with the mean adjusted-R2 difference and the share of assets
    whose F-test is significant at each level.  Ineligible assets are
    skipped and logged.
    """
    rows = []
    for nested_spec, full_spec in pairs:
        nested_names = _check_spec(nested_spec)
        full_names = _check_spec(full_spec)
        diffs, pvals = [], []
        for asset in panel.columns:
            y = panel[asset]
            try:
                # one alignment on the union so both fits share the sample
                common = y.dropna().index.intersection(
                    factors[list(full_names)].dropna().index
                )
                if len(common) < max(min_obs, len(full_names) + 2):
                    raise InsufficientDataError(f"{len(common)} months")
                y_c = y.loc[common]
                f_c = factors.loc[common]
                fit_nested = ols_fit(y_c, f_c, nested_names, min_obs=min_obs)
                fit_full = ols_fit(y_c, f_c, full_names, min_obs=min_obs)
                test = f_test_nested(fit_full, fit_nested)
            except (InsufficientDataError, CollinearityError) as exc:
                logger.warning("skipping %s for %s: %s", asset, full_names, exc)
                continue
            diffs.append(fit_full.adjusted_r2 - fit_nested.adjusted_r2)
            pvals.append(test.p_value)
        label_n = "+".join(nested_names)
        label_f = "+".join(full_names)
        if not diffs:
            logger.warning("no eligible assets for %s vs %s", label_n, label_f)
        row = {
            "nested": label_n,
            "full": label_f,
            "n_assets": len(diffs),
            "mean_adj_r2_diff": float(np.mean(diffs)) if diffs else np.nan,
        }
        for lev in levels:
            share = float(np.mean([p < lev for p in pvals])) if pvals else np.nan
            row[f"share_significant_{int(lev * 100)}pct"] = share
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass
class CorrelationResult:
    correlations: pd.DataFrame
    p_values: pd.DataFrame
    stars: pd.DataFrame

    def annotated(self) -> pd.DataFrame:
        """Correlations in percent with significance stars, table-style."""
        pct = 100 * self.correlations
        return pct.round(2).astype(str) + self.stars


def factor_correlation(factors: pd.DataFrame, min_obs: int = 24) -> CorrelationResult:
    """Pairwise Pearson correlations with two-sided significance stars.

    Stars: *** at 1%, ** at 5%, * at 10%.  Each pair uses its common
    non-missing sample, which must span at least ``min_obs`` months.
    """
    names = list(factors.columns)
    corr = pd.DataFrame(np.eye(len(names)), index=names, columns=names)
    pval = pd.DataFrame(np.zeros((len(names), len(names))), index=names, columns=names)
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            if j > i:
                continue
            pair = factors[[a, b]].dropna()
            if len(pair) < min_obs:
                raise InsufficientDataError(
                    f"{a}/{b} share only {len(pair)} months; need {min_obs}"
                )
            x, y = pair[a].to_numpy(), pair[b].to_numpy()
            tol_x = 1e-12 * (1.0 + abs(float(np.mean(x))))
            tol_y = 1e-12 * (1.0 + abs(float(np.mean(y))))
            if np.std(x) <= tol_x or np.std(y) <= tol_y:
                raise ValidationError(f"constant factor in pair {a}/{b}")
            if i == j:
                continue
            r = float(np.corrcoef(x, y)[0, 1])
            n = len(pair)
            if abs(r) >= 1.0:
                p = 0.0
            else:
                t = r * np.sqrt((n - 2) / (1.0 - r * r))
                p = float(2 * stats.t.sf(abs(t), n - 2))
            corr.loc[a, b] = corr.loc[b, a] = r
            pval.loc[a, b] = pval.loc[b, a] = p
    stars = pval.map(
        lambda p: "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.10 else ""
    )
    return CorrelationResult(correlations=corr, p_values=pval, stars=stars)


@dataclass
class DescriptiveStats:
    """Annualized return statistics of a monthly series."""

    mean_annualized: float
    vol_annualized: float
    skewness: float
    kurtosis: float  # raw (normal = 3), not excess
    max_drawdown: float  # stored as a nonpositive number
    best_month: float
    worst_month: float


def descriptive_stats(series) -> DescriptiveStats:
    r = np.asarray(series, dtype=float)
    r = r[np.isfinite(r)]
    if len(r) == 0:
        raise ValidationError("empty return series")
    levels = np.cumprod(1.0 + r)
    peaks = np.maximum.accumulate(np.concatenate([[1.0], levels]))[1:]
    drawdowns = levels / peaks - 1.0
    std = float(np.std(r, ddof=1)) if len(r) > 1 else 0.0
    return DescriptiveStats(
        mean_annualized=float(12.0 * np.mean(r)),
        vol_annualized=float(np.sqrt(12.0) * std),
        skewness=float(stats.skew(r)) if std > 0 else np.nan,
        kurtosis=float(stats.kurtosis(r, fisher=False)) if std > 0 else np.nan,
        max_drawdown=float(min(drawdowns.min(), 0.0)),
        best_month=float(r.max()),
        worst_month=float(r.min()),
    )


def quintile_sort(betas) -> list[list]:
    """Split assets into five equal-weight portfolios by ascending beta.

    Ties resolve by identifier order.  Returns the five identifier lists
    from lowest (Q1) to highest (Q5) beta.
    """
    s = pd.Series(betas).dropna()
    if len(s) < 5:
        raise InsufficientDataError("need at least 5 assets for quintiles")
    order = sorted(s.index, key=lambda a: (s[a], str(a)))
    return [list(chunk) for chunk in np.array_split(np.array(order, dtype=object), 5)]


class FactorOLS(BaseEstimator, RegressorMixin):
    """Multi-factor OLS as an sklearn regressor.

    ``X`` holds factor returns, one column per factor; the intercept is
    always included.

    Attributes
    ----------
    alpha_ : intercept.
    coef_ : factor loadings in column order.
    adjusted_r2_, residual_variance_, std_errors_, n_obs_ : fit statistics.
    """

    def __init__(self, min_obs: int = DEFAULT_MIN_OBS):
        self.min_obs = min_obs

    def fit(self, X, y):
        if isinstance(X, pd.DataFrame):
            names = tuple(str(c) for c in X.columns)
            frame = X.copy()
            frame.columns = names
        else:
            X = np.asarray(X, dtype=float)
            if X.ndim == 1:
                X = X.reshape(-1, 1)
            names = tuple(f"f{i}" for i in range(X.shape[1]))
            frame = pd.DataFrame(X, columns=names)
        result = ols_fit(np.asarray(y, float), frame, names, min_obs=self.min_obs)
        self.result_ = result
        self.factor_names_ = names
        self.alpha_ = result.alpha
        self.coef_ = np.array([result.betas[n] for n in names])
        self.adjusted_r2_ = result.adjusted_r2
        self.residual_variance_ = result.residual_variance
        self.std_errors_ = result.std_errors
        self.n_obs_ = result.n_obs
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("FactorOLS instance is not fitted yet")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return self.alpha_ + X @ self.coef_
