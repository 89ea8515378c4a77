"""CSV ingestion and emission.

Long-format inputs (header row, ISO-8601 month-end dates in the first
column):

* returns: ``date,asset,return``
* scores:  ``date,asset,vc,pp,na[,score]``
* caps:    ``date,asset,cap``

plus flat per-asset inputs for optimization (``asset,beta_mkt,beta_bmg,
idio_vol[,intensity][,group]``) and benchmark weights (``asset,weight``).
Parse failures name the offending file row; duplicate (date, asset) pairs
are rejected.  Emitted floats use shortest round-trip formatting so
re-ingestion is lossless.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ValidationError
from .factors import ScorePanel
from .linalg import FactorCovarianceModel

__all__ = [
    "read_returns_csv",
    "read_caps_csv",
    "read_scores_csv",
    "read_factors_csv",
    "read_model_csv",
    "read_benchmark_csv",
    "write_factor_csv",
    "write_wide_csv",
]


def _read_raw(path, required_columns):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except Exception as exc:
        raise ValidationError(f"{path}: cannot parse CSV: {exc}") from exc
    missing = [c for c in required_columns if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    return df


def _parse_dates(df, path):
    parsed = pd.to_datetime(df["date"], format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna() & df["date"].notna()
    if bad.any():
        row = int(np.argmax(bad.values)) + 2  # header is row 1
        raise ValidationError(
            f"{path}: malformed date {df['date'].iloc[row - 2]!r} at row {row}"
        )
    return parsed


def _parse_floats(df, column, path, allow_blank=False):
    # float() rather than pd.to_numeric: the latter is not correctly-rounded,
    # which would break the lossless round-trip guarantee
    raw = df[column]
    values = np.empty(len(raw))
    for pos, cell in enumerate(raw):
        blank = cell is None or (isinstance(cell, float) and np.isnan(cell)) or str(cell).strip() == ""
        if blank:
            if allow_blank:
                values[pos] = np.nan
                continue
            raise ValidationError(f"{path}: missing {column} value at row {pos + 2}")
        try:
            values[pos] = float(cell)
        except (TypeError, ValueError) as exc:
            raise ValidationError(
                f"{path}: non-numeric {column} value {cell!r} at row {pos + 2}"
            ) from exc
    return pd.Series(values, index=raw.index)


def _check_duplicates(df, path):
    dup = df.duplicated(["date", "asset"])
    if dup.any():
        row = int(np.argmax(dup.values)) + 2
        raise ValidationError(
            f"{path}: duplicate (date, asset) pair at row {row}: "
            f"({df['date'].iloc[row - 2]}, {df['asset'].iloc[row - 2]})"
        )


def _read_long(path, value_column):
    df = _read_raw(path, ["date", "asset", value_column])
    dates = _parse_dates(df, path)
    values = _parse_floats(df, value_column, path)
    _check_duplicates(df, path)
    out = pd.DataFrame({"date": dates, "asset": df["asset"], "value": values})
    wide = out.pivot(index="date", columns="asset", values="value").sort_index()
    wide.columns.name = None
    wide.index.name = "date"
    return wide


def read_returns_csv(path) -> pd.DataFrame:
    """Monthly returns as dates x assets; absent rows mean out-of-index."""
    return _read_long(path, "return")


def read_caps_csv(path) -> pd.DataFrame:
    caps = _read_long(path, "cap")
    if (caps.values[np.isfinite(caps.values)] <= 0).any():
        raise ValidationError(f"{path}: caps must be positive")
    return caps


def read_scores_csv(path, caps: pd.DataFrame | None = None) -> ScorePanel:
    """Score panel from ``date,asset,vc,pp,na[,score]`` plus a caps frame."""
    df = _read_raw(path, ["date", "asset"])
    has_sub = all(c in df.columns for c in ("vc", "pp", "na"))
    has_generic = "score" in df.columns
    if not has_sub and not has_generic:
        raise ValidationError(f"{path}: need vc/pp/na columns or a score column")
    dates = _parse_dates(df, path)
    _check_duplicates(df, path)

    def pivot(col):
        vals = _parse_floats(df, col, path, allow_blank=True)
        frame = pd.DataFrame({"date": dates, "asset": df["asset"], "v": vals})
        wide = frame.pivot(index="date", columns="asset", values="v").sort_index()
        wide.columns.name = None
        return wide

    if caps is None:
        raise ValidationError("score ingestion requires a caps frame")
    return ScorePanel(
        market_cap=caps,
        vc=pivot("vc") if has_sub else None,
        pp=pivot("pp") if has_sub else None,
        na=pivot("na") if has_sub else None,
        generic_score=pivot("score") if has_generic else None,
    )


def read_factors_csv(path) -> pd.DataFrame:
    """Factor returns from long ``date,factor,return`` format."""
    df = _read_raw(path, ["date", "factor", "return"])
    dates = _parse_dates(df, path)
    values = _parse_floats(df, "return", path)
    frame = pd.DataFrame({"date": dates, "factor": df["factor"], "value": values})
    if frame.duplicated(["date", "factor"]).any():
        raise ValidationError(f"{path}: duplicate (date, factor) pair")
    wide = frame.pivot(index="date", columns="factor", values="value").sort_index()
    wide.columns.name = None
    wide.index.name = "date"
    return wide


def read_model_csv(path, sigma_mkt: float, sigma_bmg: float | None = None):
    """Covariance model inputs: ``asset,beta_mkt,idio_vol[,beta_bmg][,intensity][,group]``.

    Returns (model, intensities_or_None, groups_or_None); asset order follows
    the file.
    """
    df = _read_raw(path, ["asset", "beta_mkt", "idio_vol"])
    beta_mkt = _parse_floats(df, "beta_mkt", path).to_numpy()
    idio_vol = _parse_floats(df, "idio_vol", path).to_numpy()
    beta_bmg = None
    if "beta_bmg" in df.columns:
        beta_bmg = _parse_floats(df, "beta_bmg", path).to_numpy()
    if df["asset"].duplicated().any():
        raise ValidationError(f"{path}: duplicate asset identifiers")
    model = FactorCovarianceModel(
        beta_mkt=beta_mkt,
        idio_var=idio_vol**2,
        sigma_mkt=sigma_mkt,
        beta_bmg=beta_bmg,
        sigma_bmg=sigma_bmg if beta_bmg is not None else None,
        assets=tuple(df["asset"]),
    )
    intensities = (
        _parse_floats(df, "intensity", path).to_numpy()
        if "intensity" in df.columns
        else None
    )
    groups = df["group"].tolist() if "group" in df.columns else None
    return model, intensities, groups


def read_benchmark_csv(path) -> pd.Series:
    df = _read_raw(path, ["asset", "weight"])
    weights = _parse_floats(df, "weight", path)
    if df["asset"].duplicated().any():
        raise ValidationError(f"{path}: duplicate asset identifiers")
    return pd.Series(weights.to_numpy(), index=df["asset"].tolist(), name="weight")


def _fmt_date(d) -> str:
    return pd.Timestamp(d).strftime("%Y-%m-%d")


def write_factor_csv(series_or_frame, path) -> None:
    """Emit factor returns in long ``date,factor,return`` format."""
    if isinstance(series_or_frame, pd.Series):
        frame = series_or_frame.to_frame()
    else:
        frame = series_or_frame
    rows = []
    for date, row in frame.iterrows():
        for name, value in row.items():
            if pd.notna(value):
                rows.append((_fmt_date(date), name, repr(float(value))))
    out = pd.DataFrame(rows, columns=["date", "factor", "return"])
    out.to_csv(path, index=False)


def write_wide_csv(frame: pd.DataFrame, path, value_name: str) -> None:
    """Emit a dates x assets frame in long ``date,asset,<value_name>`` format."""
    rows = []
    for date, row in frame.iterrows():
        for asset, value in row.items():
            if pd.notna(value):
                rows.append((_fmt_date(date), asset, repr(float(value))))
    out = pd.DataFrame(rows, columns=["date", "asset", value_name])
    out.to_csv(path, index=False)


