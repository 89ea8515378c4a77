"""Command-line interface.

Subcommands cover the full pipeline: synthesize or ingest data, build the
long-short factor, estimate static and time-varying betas, optimize
portfolios, and summarize run outputs.  Exit codes: 0 success, 2 validation
error, 3 infeasible optimization, 4 numerical failure.
"""

from __future__ import annotations

import functools
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import io as crio
from .enhanced_index import Benchmark, group_exposure, te_linearity_report, te_optimize
from .exceptions import (
    CarbonRiskError,
    CollinearityError,
    DegenerateSortError,
    EmptyUniverseError,
    EstimationError,
    InfeasibleProblemError,
    InsufficientDataError,
    SingularMatrixError,
    ValidationError,
)
from .factors import FactorBuildConfig, build_bmg_factor
from .kalman import kalman_filter, mle_fit
from .minvar import (
    gmv_capm,
    gmv_two_factor,
    mv_capm_long_only,
    mv_carbon_constrained,
    mv_two_factor_long_only,
    mv_with_intensity_exclusion,
    waci,
)
from .regression import MODEL_SPECS, batch_compare, f_test_nested, ols_fit
from .synth import SynthSpec, generate_panel

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

_EXIT_CODES = (
    (InfeasibleProblemError, EXIT_INFEASIBLE),
    (EmptyUniverseError, EXIT_INFEASIBLE),
    (ValidationError, EXIT_VALIDATION),
    (InsufficientDataError, EXIT_VALIDATION),
    (DegenerateSortError, EXIT_VALIDATION),
    (EstimationError, EXIT_NUMERICAL),
    (SingularMatrixError, EXIT_NUMERICAL),
    (CollinearityError, EXIT_NUMERICAL),
    (CarbonRiskError, EXIT_NUMERICAL),
)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CarbonRiskError as exc:
            for etype, code in _EXIT_CODES:
                if isinstance(exc, etype):
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(code)
            raise

    return wrapper


def _thread_count() -> int:
    raw = os.environ.get("CARBON_BETA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _read_config(ctx, param, value):
    """``key = value`` lines become default option values.

    Keys use the flag spelling (``sigma-mkt``); they are translated to the
    click parameter names before populating the default map.
    """
    if value is None:
        return None
    by_flag = {}
    for p in ctx.command.params:
        for opt in getattr(p, "opts", []):
            by_flag[opt.lstrip("-")] = p.name
    defaults = {}
    for lineno, line in enumerate(Path(value).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        name = by_flag.get(key, by_flag.get(key.replace("_", "-"), key.replace("-", "_")))
        defaults[name] = val.strip()
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return value


def _config_option(fn):
    return click.option(
        "--config",
        type=click.Path(exists=True),
        callback=_read_config,
        is_eager=True,
        expose_value=False,
        help="Key=value file supplying option defaults.",
    )(fn)


@click.group()
@click.version_option(package_name="carbonrisk")
def main():
    """Carbon risk measurement and portfolio management toolkit."""


@main.command("synth")
@_config_option
@click.option("--n-assets", default=50, show_default=True)
@click.option("--n-months", default=108, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--sigma-mkt", default=0.04, show_default=True)
@click.option("--sigma-bmg", default=0.02, show_default=True)
@click.option("--step-std", default=0.0, show_default=True,
              help="Random-walk step std for market and carbon betas.")
@click.option("--out-dir", type=click.Path(), required=True)
@_handle_errors
def synth_cmd(n_assets, n_months, seed, sigma_mkt, sigma_bmg, step_std, out_dir):
    """Generate a synthetic returns panel with known betas."""
    spec = SynthSpec(
        n_assets=n_assets,
        n_months=n_months,
        seed=seed,
        sigma_mkt=sigma_mkt,
        sigma_bmg=sigma_bmg,
        beta_mkt_step_std=step_std,
        beta_bmg_step_std=step_std,
    )
    res = generate_panel(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    crio.write_wide_csv(res.returns, out / "returns.csv", "return")
    crio.write_factor_csv(res.factors, out / "factors.csv")
    res.static_betas().rename_axis("asset").to_csv(out / "true_betas.csv")
    click.echo(f"wrote returns, factors and true betas under {out}")


@main.command("build-bmg")
@_config_option
@click.option("--scores", "scores_path", type=click.Path(), required=True)
@click.option("--caps", "caps_path", type=click.Path(), required=True)
@click.option("--returns", "returns_path", type=click.Path(), required=True)
@click.option("--weighting", type=click.Choice(["CW", "EW"]), default="CW", show_default=True)
@click.option("--rebalance", type=click.Choice(["monthly", "static"]), default="monthly",
              show_default=True)
@click.option("--score-source", type=click.Choice(["bgs", "generic"]), default="bgs",
              show_default=True)
@click.option("--green-high", is_flag=True,
              help="Scores are green-high and must be negated on ingestion.")
@click.option("--name", default="BMG", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_handle_errors
def build_bmg_cmd(scores_path, caps_path, returns_path, weighting, rebalance,
                  score_source, green_high, name, out_path):
    """Build the brown-minus-green factor from score and return panels."""
    caps = crio.read_caps_csv(caps_path)
    panel = crio.read_scores_csv(scores_path, caps=caps)
    returns = crio.read_returns_csv(returns_path)
    cfg = FactorBuildConfig(
        weighting=weighting,
        rebalance=rebalance,
        score_source=score_source,
        brown_high=not green_high,
        name=name,
    )
    factor = build_bmg_factor(panel, returns, cfg)
    crio.write_factor_csv(factor, out_path)
    click.echo(f"wrote {len(factor)} factor returns to {out_path}")


@main.command("fit-ols")
@_config_option
@click.option("--returns", "returns_path", type=click.Path(), required=True)
@click.option("--factors", "factors_path", type=click.Path(), required=True)
@click.option("--model", default="MKT+BMG", show_default=True,
              help="Named spec (CAPM, FF, MKT+BMG, ...) or comma-separated factors.")
@click.option("--compare-with", default=None,
              help="Optional nested spec for per-asset F-tests.")
@click.option("--compare-out", "compare_out", type=click.Path(), default=None,
              help="Also write the aggregated nested-vs-full comparison table.")
@click.option("--min-obs", default=36, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_handle_errors
def fit_ols_cmd(returns_path, factors_path, model, compare_with, compare_out,
                min_obs, out_path):
    """Per-asset static factor regressions, one CSV row per asset."""
    returns = crio.read_returns_csv(returns_path)
    factors = crio.read_factors_csv(factors_path)
    spec = MODEL_SPECS.get(model, tuple(s.strip() for s in model.split(",")))
    nested_spec = None
    if compare_with:
        nested_spec = MODEL_SPECS.get(
            compare_with, tuple(s.strip() for s in compare_with.split(","))
        )
    rows = []
    skipped = 0
    for asset in returns.columns:
        try:
            fit = ols_fit(returns[asset], factors, spec, min_obs=min_obs)
        except (InsufficientDataError, CollinearityError):
            skipped += 1
            continue
        row = {"asset": asset, "model": "+".join(spec), "alpha": fit.alpha}
        for name in spec:
            row[f"beta_{name}"] = fit.betas[name]
        row["adj_r2"] = fit.adjusted_r2
        row["n"] = fit.n_obs
        if nested_spec:
            nested = ols_fit(returns[asset], factors, nested_spec, min_obs=min_obs)
            test = f_test_nested(fit, nested)
            row["f_stat"] = test.statistic
            row["p_value"] = test.p_value
        rows.append(row)
    pd.DataFrame(rows).to_csv(out_path, index=False)
    if compare_out:
        if not nested_spec:
            raise ValidationError("--compare-out needs --compare-with")
        table = batch_compare(returns, factors, [(nested_spec, spec)], min_obs=min_obs)
        table.to_csv(compare_out, index=False)
        click.echo(f"wrote comparison table -> {compare_out}")
    click.echo(f"fitted {len(rows)} assets ({skipped} skipped) -> {out_path}")


@main.command("fit-kalman")
@_config_option
@click.option("--returns", "returns_path", type=click.Path(), required=True)
@click.option("--factors", "factors_path", type=click.Path(), required=True)
@click.option("--factors-used", default="MKT,BMG", show_default=True)
@click.option("--min-obs", default=36, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@_handle_errors
def fit_kalman_cmd(returns_path, factors_path, factors_used, min_obs, out_dir):
    """Time-varying betas per asset; emits state paths and hyperparameters.

    Set CARBON_BETA_THREADS to fan the per-asset estimations out over a
    thread pool.
    """
    returns = crio.read_returns_csv(returns_path)
    factors = crio.read_factors_csv(factors_path)
    names = [s.strip() for s in factors_used.split(",")]
    missing = [n for n in names if n not in factors.columns]
    if missing:
        raise ValidationError(f"factors not in file: {missing}")

    def fit_one(asset):
        joined = pd.concat([returns[asset].rename("y"), factors[names]], axis=1).dropna()
        if len(joined) < min_obs:
            return asset, None, None
        y = joined["y"].to_numpy()
        x = np.column_stack([np.ones(len(joined)), joined[names].to_numpy()])
        mle = mle_fit(y, x, min_obs=min_obs)
        kf = kalman_filter(y, x, mle.config)
        return asset, joined.index, (mle, kf)

    assets = list(returns.columns)
    n_threads = _thread_count()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(fit_one, assets))
    else:
        results = [fit_one(a) for a in assets]

    path_rows, hyper_rows, skipped = [], [], 0
    state_names = ["alpha"] + [f"beta_{n.lower()}" for n in names]
    for asset, idx, payload in results:
        if payload is None:
            skipped += 1
            continue
        mle, kf = payload
        for i, date in enumerate(idx):
            row = {"date": date.strftime("%Y-%m-%d"), "asset": asset}
            row.update(dict(zip(state_names, kf.beta_filtered[i])))
            row["F"] = kf.innovation_variances[i]
            path_rows.append(row)
        hyper = {"asset": asset, "loglik": kf.loglik, "sigma_eps2": mle.config.sigma_eps2}
        for i, sn in enumerate(state_names):
            hyper[f"state_var_{sn}"] = mle.config.state_variances[i]
            hyper[f"t_stat_{sn}"] = mle.t_stats[i + 1]
        hyper_rows.append(hyper)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(path_rows).to_csv(out / "beta_paths.csv", index=False)
    pd.DataFrame(hyper_rows).to_csv(out / "hyperparameters.csv", index=False)
    click.echo(
        f"estimated {len(hyper_rows)} assets ({skipped} skipped) -> {out}"
    )


def _load_model(model_path, sigma_mkt, sigma_bmg):
    return crio.read_model_csv(model_path, sigma_mkt=sigma_mkt, sigma_bmg=sigma_bmg)


@main.command("optimize-mv")
@_config_option
@click.option("--model", "model_path", type=click.Path(), required=True,
              help="CSV: asset,beta_mkt,idio_vol[,beta_bmg][,intensity]")
@click.option("--sigma-mkt", type=float, required=True)
@click.option("--sigma-bmg", type=float, default=None)
@click.option("--long-only/--unconstrained", default=True, show_default=True)
@click.option("--beta-cap", type=float, default=None,
              help="Carbon beta cap (implies long-only).")
@click.option("--ci-cap", type=float, default=None,
              help="Carbon intensity exclusion threshold.")
@click.option("--out-dir", type=click.Path(), required=True)
@_handle_errors
def optimize_mv_cmd(model_path, sigma_mkt, sigma_bmg, long_only, beta_cap, ci_cap, out_dir):
    """Minimum-variance portfolio with optional carbon constraints."""
    model, intensities, _ = _load_model(model_path, sigma_mkt, sigma_bmg)
    if ci_cap is not None:
        if intensities is None:
            raise ValidationError("--ci-cap needs an intensity column in the model CSV")
        cap = np.inf if beta_cap is None else beta_cap
        result = mv_with_intensity_exclusion(model, cap, ci_cap, intensities)
    elif beta_cap is not None:
        result = mv_carbon_constrained(model, beta_cap)
    elif long_only:
        result = (
            mv_two_factor_long_only(model) if model.has_bmg else mv_capm_long_only(model)
        )
    else:
        result = gmv_two_factor(model) if model.has_bmg else gmv_capm(model)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    composition = pd.DataFrame(
        {"asset": model.assets, "beta_mkt": model.beta_mkt, "weight": result.weights}
    )
    if model.has_bmg:
        composition.insert(2, "beta_bmg", model.beta_bmg)
    composition.to_csv(out / "weights.csv", index=False)
    diag = {
        "beta_star": result.beta_star,
        "gamma_star": result.gamma_star,
        "lambda_bmg": result.lambda_bmg,
        "variance": result.variance,
        "volatility": float(np.sqrt(result.variance)),
        "waci": waci(result.weights, intensities) if intensities is not None else None,
        "portfolio_beta_bmg": (
            float(model.beta_bmg @ result.weights) if model.has_bmg else None
        ),
    }
    pd.DataFrame([diag]).to_csv(out / "diagnostics.csv", index=False)
    click.echo(f"wrote weights and diagnostics under {out}")


def _parse_sweep(sweep):
    try:
        start, stop, step = (float(s) for s in sweep.split(":"))
    except ValueError as exc:
        raise ValidationError(f"bad sweep spec {sweep!r}; expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise ValidationError("sweep needs step > 0 and stop >= start")
    return np.arange(start, stop + 1e-12, step)


@main.command("optimize-index")
@_config_option
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--sigma-mkt", type=float, required=True)
@click.option("--sigma-bmg", type=float, required=True)
@click.option("--benchmark", "benchmark_path", default="ew", show_default=True,
              help="Benchmark CSV (asset,weight) or 'ew' for equal weights.")
@click.option("--constraint",
              type=click.Choice(["relative", "absolute", "exclude-m", "exclude-weighted-m"]),
              default=None)
@click.option("--cap", type=float, default=None)
@click.option("--m", type=int, default=None)
@click.option("--sweep", default=None, help="start:stop:step carbon-reduction targets.")
@click.option("--out-dir", type=click.Path(), required=True)
@_handle_errors
def optimize_index_cmd(model_path, sigma_mkt, sigma_bmg, benchmark_path, constraint,
                       cap, m, sweep, out_dir):
    """Tracking-error optimization against a benchmark under carbon limits."""
    model, intensities, groups = _load_model(model_path, sigma_mkt, sigma_bmg)
    if benchmark_path == "ew":
        bench = Benchmark.equal_weight(model.n_assets)
    else:
        weights = crio.read_benchmark_csv(benchmark_path)
        aligned = weights.reindex(model.assets)
        if aligned.isna().any():
            raise ValidationError("benchmark is missing some model assets")
        bench = Benchmark(aligned.to_numpy())
    api_constraint = {
        None: None,
        "relative": "relative",
        "absolute": "absolute",
        "exclude-m": "exclude",
        "exclude-weighted-m": "exclude-weighted",
    }[constraint]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = te_optimize(
        model, bench, constraint=api_constraint, cap=cap, m=m, intensities=intensities
    )
    d = result.diagnostics
    composition = pd.DataFrame(
        {
            "asset": model.assets,
            "weight": result.weights,
            "benchmark_weight": bench.weights,
            "active_weight": result.weights - bench.weights,
        }
    )
    if model.has_bmg:
        composition["beta_bmg"] = model.beta_bmg
        if d.scaled_betas is not None:
            composition["scaled_beta"] = d.scaled_betas
    composition.to_csv(out / "weights.csv", index=False)
    pd.DataFrame(
        [
            {
                "tracking_error": d.tracking_error,
                "active_share": d.active_share,
                "excluded_count": d.excluded_count,
                "delta_bmg": d.delta_bmg,
                "lambda_bmg": d.lambda_bmg,
                "waci": d.waci,
            }
        ]
    ).to_csv(out / "diagnostics.csv", index=False)
    if d.scaled_betas is not None:
        pd.DataFrame({"asset": model.assets, "scaled_beta": d.scaled_betas}).to_csv(
            out / "scaled_betas.csv", index=False
        )
    if groups is not None:
        exposures = group_exposure(result.weights, bench.weights, groups)
        pd.DataFrame(
            [
                {"group": g, "benchmark": b_g, "portfolio": x_g, "active": delta}
                for g, (b_g, x_g, delta) in exposures.items()
            ]
        ).to_csv(out / "group_exposure.csv", index=False)
    if sweep:
        report = te_linearity_report(model, bench, _parse_sweep(sweep), intensities)
        pd.DataFrame(report.rows).to_csv(out / "sweep.csv", index=False)
        click.echo(
            f"sweep slope {report.slope:.4f} (R^2 {report.r_squared:.4f}) -> sweep.csv"
        )
    click.echo(f"wrote weights and diagnostics under {out}")


@main.command("report")
@_config_option
@click.option("--run-dir", type=click.Path(), required=True)
@_handle_errors
def report_cmd(run_dir):
    """Summarize weights/diagnostics CSVs from a previous run."""
    run = Path(run_dir)
    weights_path = run / "weights.csv"
    if not weights_path.exists():
        raise ValidationError(f"no weights.csv under {run}")
    weights = pd.read_csv(weights_path)
    table = pd.DataFrame({"asset": weights["asset"]})
    for col in ("beta_mkt", "beta_bmg"):
        if col in weights.columns:
            table[col] = weights[col].round(4)
    table["weight_pct"] = (100 * weights["weight"].astype(float)).round(2)
    for col, label in (
        ("benchmark_weight", "benchmark_pct"),
        ("active_weight", "active_pct"),
    ):
        if col in weights.columns:
            table[label] = (100 * weights[col].astype(float)).round(2)
    if "scaled_beta" in weights.columns:
        table["scaled_beta"] = weights["scaled_beta"].round(2)
    click.echo("Portfolio composition:")
    click.echo(table.to_string(index=False))
    diag_path = run / "diagnostics.csv"
    if diag_path.exists():
        diag = pd.read_csv(diag_path)
        click.echo("\nDiagnostics:")
        for col in diag.columns:
            val = diag[col].iloc[0]
            if pd.notna(val):
                click.echo(f"  {col}: {val}")
    group_path = run / "group_exposure.csv"
    if group_path.exists():
        click.echo("\nGroup exposure:")
        click.echo(pd.read_csv(group_path).to_string(index=False))
    sweep_path = run / "sweep.csv"
    if sweep_path.exists():
        click.echo("\nSweep (first rows):")
        click.echo(pd.read_csv(sweep_path).head(10).to_string(index=False))


if __name__ == "__main__":
    main()
