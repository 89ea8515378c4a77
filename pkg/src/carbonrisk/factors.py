"""Brown-minus-green factor construction.

Pipeline: aggregate sub-scores into a single brownness score, double-sort the
universe into six size/score buckets, and take the long-short return of the
brown corners against the green corners.  Monthly rebalancing uses the
previous month's scores and capitalizations to form the buckets whose return
is realized over the current month.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import DegenerateSortError, InsufficientDataError, ValidationError

__all__ = [
    "compute_bgs",
    "ScorePanel",
    "SortedBuckets",
    "sort_universe",
    "bmg_return",
    "FactorBuildConfig",
    "build_bmg_factor",
]

BUCKETS = ("SG", "SN", "SB", "BG", "BN", "BB")
CORNER_BUCKETS = ("SB", "BB", "SG", "BG")

# Fixed aggregation weights: the value-chain component dominates public
# perception, and non-adaptability amplifies their combined effect by up
# to 50%.
_VC_WEIGHT = 0.7
_PP_WEIGHT = 0.3


def compute_bgs(vc, pp, na):
    """Aggregate value-chain, public-perception and non-adaptability scores.

    All inputs must lie in [0, 1]; the output does too, with 0 fully green
    and 1 fully brown.  Accepts scalars or aligned arrays.
    """
    scalar = np.isscalar(vc) and np.isscalar(pp) and np.isscalar(na)
    vc = np.asarray(vc, dtype=float)
    pp = np.asarray(pp, dtype=float)
    na = np.asarray(na, dtype=float)
    for name, arr in (("vc", vc), ("pp", pp), ("na", na)):
        if scalar and not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} score must be finite")
        bad = (arr < 0) | (arr > 1)
        if np.any(bad[np.isfinite(arr)]):
            raise ValidationError(f"{name} scores must lie in [0, 1]")
    core = _VC_WEIGHT * vc + _PP_WEIGHT * pp
    out = (2.0 / 3.0) * core + (na / 3.0) * core
    return float(out) if scalar else out


@dataclass(frozen=True)
class SortedBuckets:
    """Six-bucket assignment from the size/brownness double sort.

    ``assignments`` maps asset identifier to one of SG, SN, SB, BG, BN, BB
    (Small/Big x Green/Neutral/Brown).
    """

    assignments: pd.Series

    def members(self, bucket: str) -> list:
        if bucket not in BUCKETS:
            raise ValidationError(f"unknown bucket {bucket!r}")
        return list(self.assignments.index[self.assignments == bucket])

    def __len__(self):
        return len(self.assignments)


def sort_universe(scores: pd.Series, caps: pd.Series) -> SortedBuckets:
    """Double sort by brownness terciles and the capitalization median.

    Terciles are rank-based with boundaries at ceil(n/3) and ceil(2n/3);
    ties at a boundary resolve by identifier order.  A degenerate boundary
    (the green block's scores reaching the brown boundary value, or vice
    versa) demotes the affected assets to Neutral, so an all-tied universe
    is entirely Neutral.  An asset exactly at the capitalization median
    counts as Big.
    """
    scores = pd.Series(scores).dropna()
    caps = pd.Series(caps).dropna()
    common = scores.index.intersection(caps.index)
    if len(common) < 6:
        raise InsufficientDataError(
            f"need at least 6 assets with score and cap, got {len(common)}"
        )
    scores = scores.loc[common]
    caps = caps.loc[common]

    order = sorted(common, key=lambda a: (scores[a], str(a)))
    n = len(order)
    k1 = int(np.ceil(n / 3))
    k2 = int(np.ceil(2 * n / 3))
    q_lo = scores[order[k1 - 1]]
    q_hi = scores[order[k2 - 1]]

    def score_bucket(rank, asset):
        if rank < k1 and scores[asset] < q_hi:
            return "G"
        if rank >= k2 and scores[asset] > q_lo:
            return "B"
        return "N"

    median_cap = float(np.median(caps.values))
    labels = {}
    for rank, asset in enumerate(order):
        size = "S" if caps[asset] < median_cap else "B"
        labels[asset] = size + score_bucket(rank, asset)
    assignments = pd.Series(labels).loc[sorted(common, key=str)]
    return SortedBuckets(assignments=assignments)


def _bucket_return(members, returns, caps, weighting):
    r = returns.loc[members].values
    if weighting == "EW":
        return float(np.mean(r))
    w = caps.loc[members].values
    return float(np.sum(w * r) / np.sum(w))


def bmg_return(
    buckets: SortedBuckets,
    returns: pd.Series,
    caps: pd.Series,
    weighting: str = "CW",
) -> float:
    """Long-short return: half the brown corners minus half the green corners.

    Each corner portfolio return is capitalization-weighted (``CW``) or
    equal-weighted (``EW``).
    """
    if weighting not in ("CW", "EW"):
        raise ValidationError(f"weighting must be CW or EW, got {weighting!r}")
    corner = {}
    for bucket in CORNER_BUCKETS:
        members = [
            a for a in buckets.members(bucket)
            if a in returns.index and pd.notna(returns[a])
        ]
        if weighting == "CW":
            members = [a for a in members if a in caps.index and pd.notna(caps[a])]
        if not members:
            raise DegenerateSortError(f"corner bucket {bucket} is empty")
        corner[bucket] = _bucket_return(members, returns, caps, weighting)
    return 0.5 * (corner["SB"] + corner["BB"]) - 0.5 * (corner["SG"] + corner["BG"])


@dataclass(frozen=True)
class ScorePanel:
    """Per-date per-asset score inputs, stored as wide date x asset frames.

    ``vc``/``pp``/``na`` carry the sub-scores in [0, 1]; ``generic_score``
    carries an alternative pre-built score (for example a carbon intensity);
    ``market_cap`` is required and strictly positive where present.
    """

    market_cap: pd.DataFrame
    vc: pd.DataFrame | None = None
    pp: pd.DataFrame | None = None
    na: pd.DataFrame | None = None
    generic_score: pd.DataFrame | None = None

    def __post_init__(self):
        if (self.market_cap.values[np.isfinite(self.market_cap.values)] <= 0).any():
            raise ValidationError("market_cap must be positive where present")
        if not self.market_cap.index.is_monotonic_increasing:
            raise ValidationError("date axis must be increasing")
        for name in ("vc", "pp", "na"):
            frame = getattr(self, name)
            if frame is None:
                continue
            vals = frame.values[np.isfinite(frame.values)]
            if ((vals < 0) | (vals > 1)).any():
                raise ValidationError(f"{name} must lie in [0, 1]")
        has_subscores = all(getattr(self, n) is not None for n in ("vc", "pp", "na"))
        if not has_subscores and self.generic_score is None:
            raise ValidationError("need vc/pp/na sub-scores or a generic score")

    def brownness(self, source: str = "bgs", brown_high: bool = True) -> pd.DataFrame:
        """Per-date per-asset brownness: higher means browner."""
        if source == "bgs":
            if self.vc is None or self.pp is None or self.na is None:
                raise ValidationError("bgs source needs vc, pp and na")
            score = compute_bgs(self.vc, self.pp, self.na)
            score = pd.DataFrame(
                score, index=self.vc.index, columns=self.vc.columns
            )
        elif source == "generic":
            if self.generic_score is None:
                raise ValidationError("no generic score in panel")
            score = self.generic_score.copy()
        else:
            raise ValidationError(f"unknown score source {source!r}")
        return score if brown_high else -score


@dataclass(frozen=True)
class FactorBuildConfig:
    """Options of the factor builder.

    ``rebalance='static'`` freezes each asset's score at its full-sample
    average; ``'monthly'`` re-sorts on each month's scores.  ``brown_high``
    declares the orientation of the score source (set False for green-high
    scores, which are negated on ingestion).
    """

    weighting: str = "CW"
    rebalance: str = "monthly"
    score_source: str = "bgs"
    brown_high: bool = True
    name: str = "BMG"

    def __post_init__(self):
        if self.weighting not in ("CW", "EW"):
            raise ValidationError("weighting must be CW or EW")
        if self.rebalance not in ("static", "monthly"):
            raise ValidationError("rebalance must be static or monthly")


def build_bmg_factor(
    panel: ScorePanel,
    returns: pd.DataFrame,
    config: FactorBuildConfig = FactorBuildConfig(),
) -> pd.Series:
    """Monthly long-short factor returns from a score panel.

    For each return month the universe is sorted on the previous month's
    scores and capitalizations; assets must have a score, a cap and a
    realized return to participate that month.
    """
    scores = panel.brownness(config.score_source, config.brown_high)
    if config.rebalance == "static":
        avg = scores.mean(axis=0)
        scores = pd.DataFrame(
            np.tile(avg.values, (len(scores.index), 1)),
            index=scores.index,
            columns=scores.columns,
        )
    caps = panel.market_cap
    dates = returns.index.intersection(scores.index).intersection(caps.index)
    if len(dates) < 2:
        raise InsufficientDataError("need at least 2 overlapping months")
    out = {}
    for prev, cur in zip(dates[:-1], dates[1:]):
        s = scores.loc[prev].dropna()
        c = caps.loc[prev].dropna()
        r = returns.loc[cur].dropna()
        eligible = s.index.intersection(c.index).intersection(r.index)
        buckets = sort_universe(s.loc[eligible], c.loc[eligible])
        out[cur] = bmg_return(buckets, r, c, weighting=config.weighting)
    series = pd.Series(out, name=config.name)
    series.index.name = "date"
    return series
