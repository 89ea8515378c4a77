"""Low-rank-plus-diagonal covariance algebra.

The covariance model used throughout the portfolio modules is

    Sigma = beta_mkt beta_mkt' sigma_mkt^2 + beta_bmg beta_bmg' sigma_bmg^2 + D

with D a positive diagonal matrix of idiosyncratic variances.  Its inverse is
available in closed form through rank-1/rank-2 Sherman-Morrison-Woodbury
updates of D^-1; this module implements those updates together with the
precision-weighted inner product ``phi`` that appears in every threshold
formula of the minimum-variance solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularMatrixError, ValidationError
from .validation import as_vector, check_positive

__all__ = [
    "FactorCovarianceModel",
    "phi",
    "smw_rank1_inverse",
    "smw_rank1_apply",
    "smw_rank2_inverse",
    "smw_rank2_apply",
]

# Denominators in portfolio use are 1 + (positive quantity); a near-zero
# value therefore signals corrupted inputs rather than a legitimate edge case.
_SINGULARITY_RTOL = 1e-12


def phi(x, y, idio_var) -> float:
    """Precision-weighted inner product sum_s x_s * y_s / idio_var_s.

    Bilinear and symmetric in (x, y).
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    iv = check_positive(idio_var, "idio_var")
    if not (len(x) == len(y) == len(iv)):
        raise ValidationError(
            f"dimension mismatch: x={len(x)}, y={len(y)}, idio_var={len(iv)}"
        )
    return float(np.sum(x * y / iv))


def _inv_diag_or_matrix(a: np.ndarray) -> np.ndarray:
    """Return A^-1 for a 1-d diagonal or a 2-d general matrix A."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        if np.any(a == 0):
            raise SingularMatrixError("diagonal A has zero entries")
        return np.diag(1.0 / a)
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"A is singular: {exc}") from exc


def smw_rank1_inverse(a, u, v) -> np.ndarray:
    """Inverse of A + u v' given A (1-d diagonal entries or 2-d matrix).

    Uses (A + uv')^-1 = A^-1 - A^-1 u v' A^-1 / (1 + v' A^-1 u).
    """
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    a_inv = _inv_diag_or_matrix(a)
    if a_inv.shape[0] != len(u) or len(u) != len(v):
        raise ValidationError("dimension mismatch between A, u and v")
    a_inv_u = a_inv @ u
    v_a_inv = v @ a_inv
    denom = 1.0 + float(v @ a_inv_u)
    scale = 1.0 + abs(float(v @ a_inv_u))
    if abs(denom) < _SINGULARITY_RTOL * scale:
        raise SingularMatrixError(f"singular rank-1 update: 1 + v'A^-1 u = {denom:.3e}")
    return a_inv - np.outer(a_inv_u, v_a_inv) / denom


def smw_rank1_apply(a, u, v, rhs) -> np.ndarray:
    """(A + uv')^-1 @ rhs without materializing the inverse."""
    rhs = as_vector(rhs, "rhs")
    a_inv = _inv_diag_or_matrix(a)
    a_inv_u = a_inv @ u
    denom = 1.0 + float(np.asarray(v) @ a_inv_u)
    scale = 1.0 + abs(denom - 1.0)
    if abs(denom) < _SINGULARITY_RTOL * scale:
        raise SingularMatrixError(f"singular rank-1 update: 1 + v'A^-1 u = {denom:.3e}")
    a_inv_rhs = a_inv @ rhs
    return a_inv_rhs - a_inv_u * (float(np.asarray(v) @ a_inv_rhs) / denom)


def smw_rank2_inverse(a_diag, u1, u2) -> np.ndarray:
    """Inverse of diag(a) + u1 u1' + u2 u2' (symmetric rank-2 update).

    The 2x2 capacitance determinant and the numerator are assembled from the
    four weighted sums sum_s u_{k,s} u_{l,s} / a_s, which keeps the whole
    computation O(n) + one outer-product expansion.
    """
    a = check_positive(a_diag, "a_diag")
    u1 = as_vector(u1, "u1")
    u2 = as_vector(u2, "u2")
    if not (len(a) == len(u1) == len(u2)):
        raise ValidationError("dimension mismatch between a_diag, u1 and u2")

    t11 = float(np.sum(u1 * u1 / a))
    t22 = float(np.sum(u2 * u2 / a))
    t12 = float(np.sum(u1 * u2 / a))

    det_s = 1.0 + t11 + t22 + t11 * t22 - t12 * t12
    scale = 1.0 + abs(t11) + abs(t22) + abs(t11 * t22) + t12 * t12
    if abs(det_s) < _SINGULARITY_RTOL * scale:
        raise SingularMatrixError(f"singular rank-2 update: |S| = {det_s:.3e}")

    u1t = u1 / a
    u2t = u2 / a
    # |S| * U S^-1 U' sandwiched between A^-1 on both sides:
    correction = (
        (1.0 + t22) * np.outer(u1t, u1t)
        + (1.0 + t11) * np.outer(u2t, u2t)
        - t12 * (np.outer(u2t, u1t) + np.outer(u1t, u2t))
    ) / det_s
    return np.diag(1.0 / a) - correction


def smw_rank2_apply(a_diag, u1, u2, rhs) -> np.ndarray:
    """(diag(a) + u1 u1' + u2 u2')^-1 @ rhs in O(n), no dense matrix."""
    a = check_positive(a_diag, "a_diag")
    u1 = as_vector(u1, "u1")
    u2 = as_vector(u2, "u2")
    rhs = as_vector(rhs, "rhs")
    if not (len(a) == len(u1) == len(u2) == len(rhs)):
        raise ValidationError("dimension mismatch in rank-2 apply")
    t11 = float(np.sum(u1 * u1 / a))
    t22 = float(np.sum(u2 * u2 / a))
    t12 = float(np.sum(u1 * u2 / a))
    det_s = 1.0 + t11 + t22 + t11 * t22 - t12 * t12
    scale = 1.0 + abs(t11) + abs(t22) + abs(t11 * t22) + t12 * t12
    if abs(det_s) < _SINGULARITY_RTOL * scale:
        raise SingularMatrixError(f"singular rank-2 update: |S| = {det_s:.3e}")
    r_t = rhs / a
    p1 = float(u1 @ r_t)
    p2 = float(u2 @ r_t)
    c1 = ((1.0 + t22) * p1 - t12 * p2) / det_s
    c2 = ((1.0 + t11) * p2 - t12 * p1) / det_s
    return r_t - (c1 * u1 + c2 * u2) / a


@dataclass(frozen=True)
class FactorCovarianceModel:
    """Parametric covariance of asset returns under one or two risk factors.

    Parameters
    ----------
    beta_mkt : array of market betas, one per asset.
    idio_var : array of idiosyncratic return variances (strictly positive).
    sigma_mkt : market factor volatility (> 0).
    beta_bmg : carbon betas; ``None`` for the single-factor model.
    sigma_bmg : carbon factor volatility; required when ``beta_bmg`` is given.
    assets : optional asset identifiers (defaults to 0..n-1 as strings).
    """

    beta_mkt: np.ndarray
    idio_var: np.ndarray
    sigma_mkt: float
    beta_bmg: np.ndarray | None = None
    sigma_bmg: float | None = None
    assets: tuple[str, ...] = field(default=())

    def __post_init__(self):
        beta = as_vector(self.beta_mkt, "beta_mkt")
        iv = check_positive(self.idio_var, "idio_var")
        if len(beta) != len(iv):
            raise ValidationError("beta_mkt and idio_var lengths differ")
        if self.sigma_mkt <= 0:
            raise ValidationError("sigma_mkt must be > 0")
        object.__setattr__(self, "beta_mkt", beta)
        object.__setattr__(self, "idio_var", iv)
        if self.beta_bmg is not None:
            gamma = as_vector(self.beta_bmg, "beta_bmg")
            if len(gamma) != len(beta):
                raise ValidationError("beta_bmg length differs from beta_mkt")
            if self.sigma_bmg is None or self.sigma_bmg <= 0:
                raise ValidationError("sigma_bmg must be > 0 when beta_bmg is given")
            object.__setattr__(self, "beta_bmg", gamma)
        elif self.sigma_bmg is not None:
            raise ValidationError("sigma_bmg given without beta_bmg")
        if not self.assets:
            object.__setattr__(
                self, "assets", tuple(str(i) for i in range(len(beta)))
            )
        elif len(self.assets) != len(beta):
            raise ValidationError("assets length differs from beta_mkt")

    @property
    def n_assets(self) -> int:
        return len(self.beta_mkt)

    @property
    def has_bmg(self) -> bool:
        return self.beta_bmg is not None

    def matrix(self) -> np.ndarray:
        """Dense covariance matrix."""
        sigma = np.outer(self.beta_mkt, self.beta_mkt) * self.sigma_mkt**2
        if self.has_bmg:
            sigma = sigma + np.outer(self.beta_bmg, self.beta_bmg) * self.sigma_bmg**2
        return sigma + np.diag(self.idio_var)

    def inverse(self) -> np.ndarray:
        """Dense inverse via the diagonal-A SMW update (rank 1 or rank 2)."""
        u1 = self.sigma_mkt * self.beta_mkt
        if self.has_bmg:
            u2 = self.sigma_bmg * self.beta_bmg
            return smw_rank2_inverse(self.idio_var, u1, u2)
        return smw_rank1_inverse(self.idio_var, u1, u1)

    def solve(self, rhs) -> np.ndarray:
        """Sigma^-1 @ rhs through the O(n) matrix-action form."""
        u1 = self.sigma_mkt * self.beta_mkt
        if self.has_bmg:
            u2 = self.sigma_bmg * self.beta_bmg
            return smw_rank2_apply(self.idio_var, u1, u2, rhs)
        return smw_rank1_apply(self.idio_var, u1, u1, rhs)

    def capm_only(self) -> "FactorCovarianceModel":
        """Drop the carbon factor (single-factor restriction)."""
        return FactorCovarianceModel(
            beta_mkt=self.beta_mkt,
            idio_var=self.idio_var,
            sigma_mkt=self.sigma_mkt,
            assets=self.assets,
        )

    def restrict(self, index) -> "FactorCovarianceModel":
        """Sub-model on the given asset positions."""
        index = np.asarray(index)
        return FactorCovarianceModel(
            beta_mkt=self.beta_mkt[index],
            idio_var=self.idio_var[index],
            sigma_mkt=self.sigma_mkt,
            beta_bmg=None if self.beta_bmg is None else self.beta_bmg[index],
            sigma_bmg=self.sigma_bmg if self.has_bmg else None,
            assets=tuple(np.asarray(self.assets, dtype=object)[index]),
        )

    def with_bmg(self, beta_bmg, sigma_bmg=None) -> "FactorCovarianceModel":
        """Copy of the model with replaced carbon betas."""
        return FactorCovarianceModel(
            beta_mkt=self.beta_mkt,
            idio_var=self.idio_var,
            sigma_mkt=self.sigma_mkt,
            beta_bmg=beta_bmg,
            sigma_bmg=self.sigma_bmg if sigma_bmg is None else sigma_bmg,
            assets=self.assets,
        )
