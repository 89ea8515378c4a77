"""Convex quadratic programming via a primal active-set method.

Solves

    min  1/2 x'Qx + c'x
    s.t. A x = b,   G x <= h,   lb <= x <= ub

with Q symmetric positive semidefinite.  The active-set method is used
(rather than an interior-point solver) because the portfolio modules
cross-validate the optimizer's active set against closed-form threshold
formulas, which requires exact active-set identification and exact
Lagrange multipliers.

Multiplier convention (stationarity):

    Q x + c = A' lam_eq - G' lam_ineq + lam_lower - lam_upper

with ``lam_ineq, lam_lower, lam_upper >= 0``.  For a long-only
minimum-variance problem this reproduces the textbook first-order condition
``Sigma x = lam_0 1 + lam - lam_bmg beta`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import InfeasibleProblemError, ValidationError
from .validation import as_vector, check_symmetric

__all__ = ["QpProblem", "QpSolution", "solve_qp"]

_FEAS_TOL = 1e-8
_DUAL_TOL = 1e-9
_STEP_TOL = 1e-11
_RIDGE = 1e-12  # PSD-safe regularization of the primal KKT block


@dataclass
class QpProblem:
    """Problem data.  ``A``/``b`` are equalities, ``G``/``h`` inequalities
    (``Gx <= h``), ``lb``/``ub`` optional per-variable bounds."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.Q = check_symmetric(self.Q, "Q")
        self.c = as_vector(self.c, "c")
        n = len(self.c)
        if self.Q.shape != (n, n):
            raise ValidationError(f"Q shape {self.Q.shape} inconsistent with c ({n})")
        if (self.A is None) != (self.b is None):
            raise ValidationError("A and b must be given together")
        if (self.G is None) != (self.h is None):
            raise ValidationError("G and h must be given together")
        if self.A is not None:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = as_vector(self.b, "b")
            if self.A.shape != (len(self.b), n):
                raise ValidationError("A/b dimensions inconsistent")
        if self.G is not None:
            self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
            self.h = as_vector(self.h, "h")
            if self.G.shape != (len(self.h), n):
                raise ValidationError("G/h dimensions inconsistent")
        for name in ("lb", "ub"):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if arr.ndim == 0:
                    arr = np.full(n, float(arr))
                if arr.shape != (n,):
                    raise ValidationError(f"{name} must have length {n}")
                setattr(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.c)


@dataclass
class QpSolution:
    x: np.ndarray
    status: str  # "optimal" | "infeasible" | "max-iter"
    objective: float
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    lower_multipliers: np.ndarray
    upper_multipliers: np.ndarray
    iterations: int = 0
    kkt_residual: float = np.nan
    message: str = ""
    active_set: tuple = field(default=())


def _stack_inequalities(prob: QpProblem):
    """All inequalities as rows (g, h, kind, index) with g'x <= h."""
    n = prob.n
    rows_g, rows_h, kinds = [], [], []
    if prob.G is not None:
        for i in range(prob.G.shape[0]):
            rows_g.append(prob.G[i])
            rows_h.append(prob.h[i])
            kinds.append(("ineq", i))
    if prob.lb is not None:
        for i in range(n):
            if np.isfinite(prob.lb[i]):
                e = np.zeros(n)
                e[i] = -1.0
                rows_g.append(e)
                rows_h.append(-prob.lb[i])
                kinds.append(("lower", i))
    if prob.ub is not None:
        for i in range(n):
            if np.isfinite(prob.ub[i]):
                e = np.zeros(n)
                e[i] = 1.0
                rows_g.append(e)
                rows_h.append(prob.ub[i])
                kinds.append(("upper", i))
    if rows_g:
        return np.array(rows_g), np.array(rows_h), kinds
    return np.zeros((0, n)), np.zeros(0), kinds


def _feasible_point(prob: QpProblem) -> np.ndarray:
    """Phase-1 feasible point (LP with zero objective), or raise."""
    n = prob.n
    if prob.G is None and prob.lb is None and prob.ub is None:
        if prob.A is None:
            return np.zeros(n)
        x0, *_ = np.linalg.lstsq(prob.A, prob.b, rcond=None)
        if np.max(np.abs(prob.A @ x0 - prob.b)) > _FEAS_TOL:
            raise InfeasibleProblemError("equality system has no solution")
        return x0
    bounds = []
    for i in range(n):
        lo = prob.lb[i] if prob.lb is not None else -np.inf
        hi = prob.ub[i] if prob.ub is not None else np.inf
        bounds.append((None if lo == -np.inf else lo, None if hi == np.inf else hi))
    res = linprog(
        c=np.zeros(n),
        A_ub=prob.G,
        b_ub=prob.h,
        A_eq=prob.A,
        b_eq=prob.b,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleProblemError(f"no feasible point: {res.message}")
    if not res.success:
        raise InfeasibleProblemError(f"phase-1 LP failed: {res.message}")
    return np.asarray(res.x, dtype=float)


def _is_feasible(prob: QpProblem, x: np.ndarray, g_all, h_all) -> bool:
    if prob.A is not None and np.max(np.abs(prob.A @ x - prob.b)) > _FEAS_TOL:
        return False
    if len(h_all) and np.max(g_all @ x - h_all) > _FEAS_TOL:
        return False
    return True


def _kkt_solve(q_reg, a_eq, c_active, grad):
    """Solve the equality-constrained QP step; returns (p, y_eq, y_active)."""
    n = q_reg.shape[0]
    constraint_rows = [m for m in (a_eq, c_active) if m is not None and m.shape[0]]
    if constraint_rows:
        cmat = np.vstack(constraint_rows)
    else:
        cmat = np.zeros((0, n))
    m = cmat.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = q_reg
    kkt[:n, n:] = cmat.T
    kkt[n:, :n] = cmat
    rhs = np.concatenate([-grad, np.zeros(m)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    p = sol[:n]
    y = sol[n:]
    n_eq = 0 if a_eq is None else a_eq.shape[0]
    return p, y[:n_eq], y[n_eq:]


def solve_qp(prob: QpProblem, warm_start=None, max_iter: int | None = None) -> QpSolution:
    """Solve the QP; returns a :class:`QpSolution` with KKT multipliers.

    ``warm_start`` may be a weight vector used as the starting point when it
    is feasible (useful along constraint sweeps).  Constraint selection
    tie-breaks by lowest row index, so results are deterministic.
    """
    n = prob.n
    g_all, h_all, kinds = _stack_inequalities(prob)
    n_ineq_rows = len(h_all)
    if max_iter is None:
        max_iter = 100 + 20 * (n + n_ineq_rows)

    if warm_start is not None:
        x = as_vector(warm_start, "warm_start").copy()
        if not _is_feasible(prob, x, g_all, h_all):
            x = _feasible_point(prob)
    else:
        x = _feasible_point(prob)

    q_reg = prob.Q + _RIDGE * np.eye(n)
    working: list[int] = []
    status = "max-iter"
    y_eq = np.zeros(0 if prob.A is None else prob.A.shape[0])
    y_act = np.zeros(0)
    it = 0

    for it in range(1, max_iter + 1):
        grad = prob.Q @ x + prob.c
        c_active = g_all[working] if working else None
        p, y_eq, y_act = _kkt_solve(q_reg, prob.A, c_active, grad)
        scale = 1.0 + np.max(np.abs(x))

        if np.max(np.abs(p), initial=0.0) <= _STEP_TOL * scale:
            # Stationary on the working set: check dual feasibility.
            if len(working) == 0 or np.min(y_act) >= -_DUAL_TOL * (1.0 + np.max(np.abs(y_act), initial=0.0)):
                status = "optimal"
                break
            # Drop the most negative multiplier (lowest index on ties).
            worst = int(np.argmin(y_act))
            del working[worst]
            continue

        # Ratio test against inactive inequalities.
        alpha = 1.0
        blocker = -1
        if n_ineq_rows:
            inactive = [i for i in range(n_ineq_rows) if i not in working]
            for i in inactive:
                d = float(g_all[i] @ p)
                if d > 1e-13 * scale:
                    room = float(h_all[i] - g_all[i] @ x)
                    a_i = max(room, 0.0) / d
                    if a_i < alpha - 1e-15:
                        alpha = a_i
                        blocker = i
        x = x + alpha * p
        if blocker >= 0:
            working.append(blocker)
            working.sort()

    grad = prob.Q @ x + prob.c
    eq_mult = -y_eq if len(y_eq) else np.zeros(0)
    n_g = 0 if prob.G is None else prob.G.shape[0]
    ineq_mult = np.zeros(n_g)
    lower_mult = np.zeros(n)
    upper_mult = np.zeros(n)
    for w_pos, row in enumerate(working):
        kind, idx = kinds[row]
        lam = float(y_act[w_pos]) if w_pos < len(y_act) else 0.0
        lam = max(lam, 0.0) if status == "optimal" else lam
        if kind == "ineq":
            ineq_mult[idx] = lam
        elif kind == "lower":
            lower_mult[idx] = lam
        else:
            upper_mult[idx] = lam

    # Residual of the stationarity equation under the sign convention above.
    recon = np.zeros(n)
    if prob.A is not None:
        recon += prob.A.T @ eq_mult
    if n_g:
        recon -= prob.G.T @ ineq_mult
    recon += lower_mult - upper_mult
    kkt_residual = float(np.max(np.abs(grad - recon)))

    return QpSolution(
        x=x,
        status=status,
        objective=float(0.5 * x @ prob.Q @ x + prob.c @ x),
        eq_multipliers=eq_mult,
        ineq_multipliers=ineq_mult,
        lower_multipliers=lower_mult,
        upper_multipliers=upper_mult,
        iterations=it,
        kkt_residual=kkt_residual,
        message="" if status == "optimal" else f"stopped after {it} iterations",
        active_set=tuple(kinds[row] for row in working),
    )
