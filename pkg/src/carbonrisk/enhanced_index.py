"""Benchmark-relative portfolio optimization with carbon constraints.

Minimizes the tracking-error variance (x - b)' Sigma (x - b) under the budget
and long-only constraints plus one of four carbon constraint families:

* ``relative``          -- beta_bmg' x <= cap
* ``absolute``          -- |beta_bmg' x| <= cap (two-sided; equality at cap 0)
* ``exclude``           -- zero out the m assets with the largest carbon beta
* ``exclude-weighted``  -- zero out the m largest benchmark-weight x carbon
                           beta products

Every solve reports the diagnostics used to compare constraint families:
tracking error, active share, exclusion count, the carbon-beta reduction
relative to the benchmark, WACI, the carbon constraint multiplier, and the
scaled carbon betas Sigma^-1 beta_bmg that determine over/underweights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    EmptyUniverseError,
    EstimationError,
    InfeasibleProblemError,
    ValidationError,
)
from .linalg import FactorCovarianceModel
from .minvar import SUPPORT_TOL, waci
from .qp import QpProblem, QpSolution, solve_qp
from .validation import as_vector, check_nonnegative, check_weights

__all__ = [
    "Benchmark",
    "IndexDiagnostics",
    "TrackingResult",
    "active_share",
    "group_exposure",
    "scaled_betas",
    "te_optimize",
    "te_linearity_report",
    "EnhancedIndexTracker",
]

_CONSTRAINTS = (None, "relative", "absolute", "exclude", "exclude-weighted")


@dataclass(frozen=True)
class Benchmark:
    """Long-only benchmark weights summing to one."""

    weights: np.ndarray
    kind: str = "custom"  # "EW" | "CW" | "custom"

    def __post_init__(self):
        w = check_weights(self.weights, "benchmark weights", tol=1e-12)
        if np.any(w < 0):
            raise ValidationError("benchmark weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def equal_weight(cls, n: int) -> "Benchmark":
        return cls(np.full(n, 1.0 / n), kind="EW")

    @classmethod
    def cap_weighted(cls, caps) -> "Benchmark":
        caps = check_nonnegative(caps, "caps")
        total = caps.sum()
        if total <= 0:
            raise ValidationError("total capitalization must be positive")
        return cls(caps / total, kind="CW")


@dataclass
class IndexDiagnostics:
    tracking_error: float
    active_share: float
    excluded_count: int
    delta_bmg: float
    lambda_bmg: float
    waci: float | None = None
    scaled_betas: np.ndarray | None = None


@dataclass
class TrackingResult:
    weights: np.ndarray
    diagnostics: IndexDiagnostics
    qp: QpSolution | None = None
    excluded: tuple[int, ...] = field(default=())


def active_share(x, b) -> float:
    """Half the L1 distance between two weight vectors."""
    x = check_weights(x, "x", tol=1e-6)
    b = check_weights(b, "b", tol=1e-6)
    if len(x) != len(b):
        raise ValidationError("weight vectors must share length")
    return float(0.5 * np.abs(x - b).sum())


def scaled_betas(model: FactorCovarianceModel, beta_bmg=None) -> np.ndarray:
    """Sigma^-1 beta_bmg, the statistic governing over/underweights."""
    gamma = model.beta_bmg if beta_bmg is None else as_vector(beta_bmg, "beta_bmg")
    if gamma is None:
        raise ValidationError("no carbon betas available")
    return model.inverse() @ gamma


def _excluded_positions(model, b, m, weighted) -> np.ndarray:
    n = model.n_assets
    if m >= n:
        raise EmptyUniverseError(f"cannot exclude {m} of {n} assets")
    score = model.beta_bmg * (b if weighted else 1.0)
    # m largest scores; stable order so ties resolve by lowest position
    order = np.argsort(-score, kind="stable")
    return np.sort(order[:m])


def te_optimize(
    model: FactorCovarianceModel,
    benchmark: Benchmark,
    constraint: str | None = None,
    cap: float | None = None,
    m: int | None = None,
    intensities=None,
    warm_start=None,
) -> TrackingResult:
    """Tracking-error minimization under the chosen carbon constraint.

    With ``constraint=None`` the optimum is the benchmark itself.  The
    reported ``lambda_bmg`` follows the reduction direction: it is positive
    when the carbon cap binds from above.
    """
    if constraint not in _CONSTRAINTS:
        raise ValidationError(f"unknown constraint {constraint!r}")
    if constraint in ("relative", "absolute"):
        if cap is None:
            raise ValidationError(f"{constraint!r} constraint needs a cap")
        if m is not None:
            raise ValidationError(f"{constraint!r} constraint does not take m")
    if constraint in ("exclude", "exclude-weighted"):
        if m is None:
            raise ValidationError(f"{constraint!r} constraint needs m")
        if cap is not None:
            raise ValidationError(f"{constraint!r} constraint does not take a cap")
    if constraint is not None and not model.has_bmg:
        raise ValidationError("carbon constraints need a model with beta_bmg")

    n = model.n_assets
    b = benchmark.weights
    if len(b) != n:
        raise ValidationError("benchmark length differs from model")
    sigma = model.matrix()
    gamma = model.beta_bmg

    excluded = np.array([], dtype=int)
    if constraint in ("exclude", "exclude-weighted"):
        excluded = _excluded_positions(model, b, int(m), constraint == "exclude-weighted")

    keep = np.setdiff1d(np.arange(n), excluded)
    q_full = sigma
    c_full = -sigma @ b
    eq_rows = [np.ones(n)]
    eq_rhs = [1.0]
    g_rows, g_rhs = [], []
    if constraint == "relative":
        g_rows.append(gamma.copy())
        g_rhs.append(float(cap))
    elif constraint == "absolute":
        if cap < 0:
            raise ValidationError("absolute cap must be nonnegative")
        if cap == 0:
            eq_rows.append(gamma.copy())
            eq_rhs.append(0.0)
        else:
            g_rows.append(gamma.copy())
            g_rhs.append(float(cap))
            g_rows.append(-gamma.copy())
            g_rhs.append(float(cap))

    prob = QpProblem(
        Q=q_full[np.ix_(keep, keep)],
        c=c_full[keep],
        A=np.array([row[keep] for row in eq_rows]),
        b=np.array(eq_rhs),
        G=np.array([row[keep] for row in g_rows]) if g_rows else None,
        h=np.array(g_rhs) if g_rhs else None,
        lb=np.zeros(len(keep)),
    )
    ws = None if warm_start is None else as_vector(warm_start, "warm_start")[keep]
    sol = solve_qp(prob, warm_start=ws)
    if sol.status != "optimal":
        raise EstimationError(f"tracking-error QP did not converge: {sol.message}")

    x = np.zeros(n)
    x[keep] = sol.x

    if constraint == "relative":
        lambda_bmg = float(sol.ineq_multipliers[0])
    elif constraint == "absolute":
        if cap == 0:
            # equality row multiplier, reported in the reduction direction
            lambda_bmg = -float(sol.eq_multipliers[1])
        else:
            lambda_bmg = float(sol.ineq_multipliers[0] - sol.ineq_multipliers[1])
    else:
        lambda_bmg = 0.0

    diff = x - b
    te_var = float(diff @ sigma @ diff)
    diag = IndexDiagnostics(
        tracking_error=float(np.sqrt(max(te_var, 0.0))),
        active_share=float(0.5 * np.abs(diff).sum()),
        excluded_count=int(np.sum((x < SUPPORT_TOL) & (b > 0))),
        delta_bmg=float(gamma @ (b - x)) if model.has_bmg else 0.0,
        lambda_bmg=lambda_bmg,
        waci=None if intensities is None else waci(x, intensities),
        scaled_betas=scaled_betas(model) if model.has_bmg else None,
    )
    return TrackingResult(
        weights=x, diagnostics=diag, qp=sol,
        excluded=tuple(int(i) for i in excluded),
    )


def group_exposure(x, b, labels):
    """Per-group benchmark weight, portfolio weight, and active exposure.

    ``labels`` maps each asset position to its group (region or sector).
    Returns ``{group: (b_G, x_G, delta_G)}``; the deltas sum to zero by the
    budget constraint.
    """
    x = as_vector(x, "x")
    b = as_vector(b, "b")
    labels = list(labels)
    if not (len(x) == len(b) == len(labels)):
        raise ValidationError("x, b and labels must share length")
    if any(lab is None or (isinstance(lab, float) and np.isnan(lab)) for lab in labels):
        raise ValidationError("every asset must be mapped to a group")
    out = {}
    for group in sorted(set(labels), key=str):
        mask = np.array([lab == group for lab in labels])
        b_g = float(b[mask].sum())
        x_g = float(x[mask].sum())
        out[group] = (b_g, x_g, x_g - b_g)
    return out


@dataclass
class LinearityReport:
    rows: list[dict]
    slope: float
    intercept: float
    r_squared: float


def te_linearity_report(
    model: FactorCovarianceModel,
    benchmark: Benchmark,
    deltas,
    intensities=None,
) -> LinearityReport:
    """Sweep carbon-beta reduction targets and fit tracking error against them.

    Each target ``delta`` is imposed through the relative cap
    ``beta_bmg' b - delta``.  Infeasible targets are kept in the table with
    ``feasible=False`` and skipped in the fit.
    """
    b = benchmark.weights
    base = float(model.beta_bmg @ b)
    rows = []
    warm = None
    for delta in np.asarray(deltas, dtype=float):
        try:
            res = te_optimize(
                model, benchmark, constraint="relative",
                cap=base - delta, intensities=intensities, warm_start=warm,
            )
        except InfeasibleProblemError:
            rows.append({"delta_target": float(delta), "feasible": False})
            continue
        warm = res.weights
        d = res.diagnostics
        rows.append(
            {
                "delta_target": float(delta),
                "feasible": True,
                "delta_bmg": d.delta_bmg,
                "tracking_error": d.tracking_error,
                "lambda_bmg": d.lambda_bmg,
                "active_share": d.active_share,
                "excluded_count": d.excluded_count,
                "waci": d.waci,
            }
        )
    pts = [(r["delta_bmg"], r["tracking_error"]) for r in rows if r["feasible"]]
    if len(pts) >= 2:
        dx = np.array([p[0] for p in pts])
        dy = np.array([p[1] for p in pts])
        design = np.column_stack([np.ones_like(dx), dx])
        coef, *_ = np.linalg.lstsq(design, dy, rcond=None)
        fitted = design @ coef
        ss_res = float(np.sum((dy - fitted) ** 2))
        ss_tot = float(np.sum((dy - dy.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
        intercept, slope = float(coef[0]), float(coef[1])
    else:
        intercept = slope = r2 = np.nan
    return LinearityReport(rows=rows, slope=slope, intercept=intercept, r_squared=r2)


class EnhancedIndexTracker(BaseEstimator):
    """Benchmark-tracking portfolio estimator with a carbon constraint.

    Parameters
    ----------
    constraint : one of None, "relative", "absolute", "exclude",
        "exclude-weighted".
    cap : carbon-beta cap for the relative/absolute families.
    m : number of exclusions for the order-statistic families.

    Attributes
    ----------
    weights_ : optimal portfolio weights.
    diagnostics_ : :class:`IndexDiagnostics` of the solution.
    """

    def __init__(self, constraint=None, cap=None, m=None):
        self.constraint = constraint
        self.cap = cap
        self.m = m

    def fit(self, model: FactorCovarianceModel, benchmark: Benchmark, intensities=None):
        result = te_optimize(
            model,
            benchmark,
            constraint=self.constraint,
            cap=self.cap,
            m=self.m,
            intensities=intensities,
        )
        self.result_ = result
        self.weights_ = result.weights
        self.diagnostics_ = result.diagnostics
        return self
