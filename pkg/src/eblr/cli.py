"""Command-line front end: synth, train, forecast, evaluate, explain.

Every command is deterministic given identical flags, inputs and seed;
randomness only enters through the synthetic generator.  Output files are
only overwritten with ``--force``.  Exit codes: 0 success, 1 validation
error (bad flags, refusal to overwrite), 2 runtime or data error.
Default output paths land in ``$EBLR_OUT_DIR`` (falling back to the
working directory).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import pandas as pd

from . import boosting, explain, serialize
from .backtest import backtest as _run_backtest
from .data import CsvSchema, SynthConfig, generate_synthetic, load_panel_csv
from .errors import EblrError

_DEFAULT_SEED = 42


class ValidationError(Exception):
    """A flag or pre-flight check failed; maps to exit code 1."""


def _out_path(path: str | None, default_name: str) -> Path:
    if path is not None:
        return Path(path)
    return Path(os.environ.get("EBLR_OUT_DIR", ".")) / default_name


def _check_overwrite(path: Path, force: bool):
    if path.exists() and not force:
        raise ValidationError(f"{path} already exists; pass --force to overwrite")
    if path.parent and not path.parent.exists():
        raise ValidationError(f"output directory {path.parent} does not exist")


def _schema_options(fn):
    fn = click.option("--schema", "schema_path", type=click.Path(), default=None,
                      help="JSON sidecar with the column-role mapping "
                           "(overrides the individual column flags).")(fn)
    fn = click.option("--covariates", default=None,
                      help="Comma-separated covariate columns "
                           "(default: every unmapped column).")(fn)
    fn = click.option("--series-col", default=None,
                      help="Series-id column (default: single series).")(fn)
    fn = click.option("--target-col", default="target", show_default=True)(fn)
    fn = click.option("--timestamp-col", default="timestamp", show_default=True)(fn)
    return fn


def _build_schema(timestamp_col, target_col, series_col, covariates,
                  schema_path, target_required=True, header=None) -> CsvSchema:
    if schema_path is not None:
        try:
            with open(schema_path, encoding="utf-8") as fh:
                return CsvSchema.from_dict(json.load(fh))
        except FileNotFoundError:
            raise ValidationError(f"schema file {schema_path} does not exist")
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read schema file {schema_path}: {exc}")
    if series_col is None and header is not None and "series_id" in header:
        series_col = "series_id"  # files written by `eblr synth` carry this column
    cov = tuple(c.strip() for c in covariates.split(",")) if covariates else None
    return CsvSchema(timestamp=timestamp_col,
                     target=target_col if target_required else None,
                     series_id=series_col, covariates=cov)


def _csv_header(path):
    try:
        return list(pd.read_csv(path, nrows=0).columns)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise EblrError(f"cannot read CSV {path}: {exc}")


def _estimator_options(fn):
    fn = click.option("--min-improvement", type=float, default=0.0, show_default=True,
                      help="Stop when an iteration improves training NRMSE "
                           "by less than this fraction.")(fn)
    fn = click.option("--no-raw-at-end", is_flag=True,
                      help="Do not union raw features into the final refit.")(fn)
    fn = click.option("--initial-features", default="none", show_default=True,
                      help="'none', 'raw', or a comma-separated column list.")(fn)
    fn = click.option("--cv-folds", type=int, default=5, show_default=True)(fn)
    fn = click.option("--lam", default="auto", show_default=True,
                      help="L1 penalty for --base lasso ('auto' = blocked CV).")(fn)
    fn = click.option("--max-depth", type=int, default=8, show_default=True)(fn)
    fn = click.option("--min-leaf", type=int, default=5, show_default=True)(fn)
    fn = click.option("--eta", type=float, default=0.001, show_default=True,
                      help="Tree post-pruning threshold (normalised SSE reduction).")(fn)
    fn = click.option("--f-max", type=int, default=5, show_default=True,
                      help="Maximum number of generated rule features.")(fn)
    fn = click.option("--base", type=click.Choice(["ols", "lasso"]), default="ols",
                      show_default=True, help="Linear base learner.")(fn)
    return fn


def _estimator_params(base, f_max, eta, min_leaf, max_depth, lam, cv_folds,
                      initial_features, no_raw_at_end, min_improvement) -> dict:
    if f_max < 1:
        raise ValidationError("--f-max must be >= 1")
    if eta < 0:
        raise ValidationError("--eta must be >= 0")
    if min_leaf < 1:
        raise ValidationError("--min-leaf must be >= 1")
    if max_depth < 1:
        raise ValidationError("--max-depth must be >= 1")
    if cv_folds < 2:
        raise ValidationError("--cv-folds must be >= 2")
    if min_improvement < 0:
        raise ValidationError("--min-improvement must be >= 0")
    if lam != "auto":
        try:
            lam = float(lam)
        except ValueError:
            raise ValidationError(f"--lam must be 'auto' or a number, got {lam!r}")
        if lam < 0:
            raise ValidationError("--lam must be >= 0")
    if initial_features in ("none", ""):
        initial = None
    elif initial_features == "raw":
        initial = "raw"
    else:
        initial = tuple(c.strip() for c in initial_features.split(","))
    return dict(base_learner=base, f_max=f_max, eta=eta, min_leaf=min_leaf,
                max_depth=max_depth, initial_features=initial,
                include_raw_at_end=not no_raw_at_end,
                min_relative_improvement=min_improvement,
                lam=lam, cv_folds=cv_folds)


def _parse_rhos(quantiles: str) -> tuple[float, ...]:
    try:
        rhos = tuple(float(q) for q in quantiles.split(","))
    except ValueError:
        raise ValidationError(f"--quantiles must be comma-separated numbers, "
                              f"got {quantiles!r}")
    if not all(0.0 < r < 1.0 for r in rhos):
        raise ValidationError("every quantile level must lie strictly in (0, 1)")
    if any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise ValidationError("quantile levels must be strictly ascending")
    return rhos


@click.group()
@click.version_option(package_name="eblr")
def cli():
    """Interpretable forecasting with rule-boosted linear regression."""


@cli.command()
@click.option("--length", type=int, default=2048, show_default=True)
@click.option("--seed", type=int, default=_DEFAULT_SEED, show_default=True)
@click.option("--noise-mean", type=float, default=5000.0, show_default=True)
@click.option("--noise-std", type=float, default=150.0, show_default=True)
@click.option("--ar1", type=float, default=-0.4, show_default=True)
@click.option("--ar2", type=float, default=0.5, show_default=True)
@click.option("--weekend-effect", type=float, default=3000.0, show_default=True)
@click.option("--promo-effect", type=float, default=1500.0, show_default=True)
@click.option("--interaction-effect", type=float, default=5500.0, show_default=True)
@click.option("--promo-prob", type=float, default=0.4, show_default=True)
@click.option("-o", "--output", default=None, help="Output CSV [default: synth.csv].")
@click.option("--force", is_flag=True, help="Overwrite existing output files.")
def synth(length, seed, noise_mean, noise_std, ar1, ar2, weekend_effect,
          promo_effect, interaction_effect, promo_prob, output, force):
    """Generate a synthetic daily-sales series and write it as CSV."""
    if length < 1:
        raise ValidationError("--length must be >= 1")
    if noise_std < 0:
        raise ValidationError("--noise-std must be >= 0")
    if not 0.0 <= promo_prob <= 1.0:
        raise ValidationError("--promo-prob must lie in [0, 1]")
    out = _out_path(output, "synth.csv")
    _check_overwrite(out, force)

    cfg = SynthConfig(length=length, noise_mean=noise_mean, noise_std=noise_std,
                      ar1=ar1, ar2=ar2, weekend_effect=weekend_effect,
                      promo_effect=promo_effect,
                      interaction_effect=interaction_effect,
                      promo_probability=promo_prob, rng_seed=seed)
    ds = generate_synthetic(cfg)
    frame = ds.frame.copy()
    frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%d")
    frame["isWeekend"] = frame["isWeekend"].astype(int)
    frame["isPromotion"] = frame["isPromotion"].astype(int)
    frame.to_csv(out, index=False)

    y = ds.frame["target"]
    click.echo(f"wrote {out}: {length} rows, target mean {y.mean():.1f}, "
               f"std {y.std():.1f}, promo share "
               f"{ds.frame['isPromotion'].mean():.3f}")


@cli.command()
@click.option("-i", "--input", "input_path", required=True, type=click.Path())
@_schema_options
@click.option("--expand-calendar", is_flag=True,
              help="Derive day-of-week/month/year covariates from timestamps.")
@_estimator_options
@click.option("--seed", type=int, default=_DEFAULT_SEED, show_default=True,
              help="Accepted for interface uniformity; training is deterministic.")
@click.option("-o", "--output", default=None, help="Model JSON [default: model.json].")
@click.option("--curve", default=None,
              help="Learning-curve CSV [default: <model>_curve.csv].")
@click.option("--force", is_flag=True, help="Overwrite existing output files.")
def train(input_path, timestamp_col, target_col, series_col, covariates,
          schema_path, expand_calendar, base, f_max, eta, min_leaf, max_depth,
          lam, cv_folds, initial_features, no_raw_at_end, min_improvement,
          seed, output, curve, force):
    """Fit a model on a panel CSV and write the model file."""
    params = _estimator_params(base, f_max, eta, min_leaf, max_depth, lam,
                               cv_folds, initial_features, no_raw_at_end,
                               min_improvement)
    out = _out_path(output, "model.json")
    curve_out = Path(curve) if curve else out.with_name(out.stem + "_curve.csv")
    _check_overwrite(out, force)
    _check_overwrite(curve_out, force)

    schema = _build_schema(timestamp_col, target_col, series_col, covariates,
                           schema_path, header=_csv_header(input_path))
    ds = load_panel_csv(input_path, schema)
    model = boosting.fit_eblr(ds, expand_calendar=expand_calendar, **params)
    serialize.save_model(model, out)

    points = explain.learning_curve(model)
    pd.DataFrame(points, columns=["iteration", "train_nrmse"]).to_csv(
        curve_out, index=False)

    final = points[-1][1]
    click.echo(f"wrote {out}: {len(model.rules_)} rules, "
               f"train NRMSE {model.base_nrmse_:.4f} -> {final:.4f} "
               f"(curve: {curve_out})")
    for rec in model.iteration_log_:
        click.echo(f"  [{rec.iteration}] {rec.rule.canonical()}  "
                   f"NRMSE {rec.train_nrmse:.4f}")


@cli.command()
@click.option("-m", "--model", "model_path", required=True, type=click.Path())
@click.option("-i", "--input", "input_path", required=True, type=click.Path(),
              help="CSV of future rows carrying the raw covariates.")
@_schema_options
@click.option("--quantiles", default="0.05,0.25,0.5,0.75,0.95", show_default=True)
@click.option("-o", "--output", default=None,
              help="Forecast CSV [default: forecast.csv].")
@click.option("--force", is_flag=True, help="Overwrite existing output files.")
def forecast(model_path, input_path, timestamp_col, target_col, series_col,
             covariates, schema_path, quantiles, output, force):
    """Point and quantile forecasts for a future-covariate CSV."""
    rhos = _parse_rhos(quantiles)
    out = _out_path(output, "forecast.csv")
    _check_overwrite(out, force)
    model = serialize.load_model(model_path)

    header = _csv_header(input_path)
    schema = _build_schema(timestamp_col, target_col, series_col, covariates,
                           schema_path, target_required=target_col in header,
                           header=header)
    future = load_panel_csv(input_path, schema)

    result = boosting.predict_quantiles(model, future, rhos)
    result.to_csv(out, index=False)
    click.echo(f"wrote {out}: {len(result)} forecast rows, "
               f"quantiles {', '.join(boosting.quantile_label(r) for r in rhos)}")


@cli.command()
@click.option("-i", "--input", "input_path", required=True, type=click.Path())
@_schema_options
@click.option("--expand-calendar", is_flag=True)
@_estimator_options
@click.option("--n-windows", type=int, default=25, show_default=True)
@click.option("--horizon", type=int, default=14, show_default=True)
@click.option("--quantiles", default="0.05,0.25,0.5,0.75,0.95", show_default=True)
@click.option("--seed", type=int, default=_DEFAULT_SEED, show_default=True,
              help="Accepted for interface uniformity; evaluation is deterministic.")
@click.option("-o", "--output", default=None, help="Report JSON [default: report.json].")
@click.option("--csv", "csv_out", default=None,
              help="Per-window CSV [default: <report>_windows.csv].")
@click.option("--force", is_flag=True, help="Overwrite existing output files.")
def evaluate(input_path, timestamp_col, target_col, series_col, covariates,
             schema_path, expand_calendar, base, f_max, eta, min_leaf,
             max_depth, lam, cv_folds, initial_features, no_raw_at_end,
             min_improvement, n_windows, horizon, quantiles, seed, output,
             csv_out, force):
    """Expanding-origin backtest; writes JSON and per-window CSV reports."""
    params = _estimator_params(base, f_max, eta, min_leaf, max_depth, lam,
                               cv_folds, initial_features, no_raw_at_end,
                               min_improvement)
    if n_windows < 1:
        raise ValidationError("--n-windows must be >= 1")
    if horizon < 1:
        raise ValidationError("--horizon must be >= 1")
    rhos = _parse_rhos(quantiles)
    out = _out_path(output, "report.json")
    csv_path = Path(csv_out) if csv_out else out.with_name(out.stem + "_windows.csv")
    _check_overwrite(out, force)
    _check_overwrite(csv_path, force)

    schema = _build_schema(timestamp_col, target_col, series_col, covariates,
                           schema_path, header=_csv_header(input_path))
    ds = load_panel_csv(input_path, schema)
    report = _run_backtest(ds, n_windows, horizon, rhos=rhos,
                           expand_calendar=expand_calendar, **params)

    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    pd.DataFrame(report.to_rows(), columns=["window", "metric", "value"]).to_csv(
        csv_path, index=False)

    agg = report.aggregate
    click.echo(f"wrote {out} and {csv_path}")
    click.echo(f"aggregate over {n_windows} windows x horizon {horizon}: "
               f"NRMSE {agg['nrmse']:.4f}, ND {agg['nd']:.4f}, "
               f"mean WSPL {agg['mean_wspl']:.4f}")


@cli.command("explain")
@click.option("-m", "--model", "model_path", required=True, type=click.Path())
@click.option("--top", type=int, default=10, show_default=True,
              help="Keep the top-k covariates in the importance CSV.")
@click.option("-o", "--output", default=None,
              help="Importance CSV [default: importance.csv].")
@click.option("--report", "report_path", default=None,
              help="Also write the full rule report as JSON.")
@click.option("--force", is_flag=True, help="Overwrite existing output files.")
def explain_cmd(model_path, top, output, report_path, force):
    """Feature importances and the per-rule report of a trained model."""
    if top < 1:
        raise ValidationError("--top must be >= 1")
    out = _out_path(output, "importance.csv")
    _check_overwrite(out, force)
    if report_path:
        _check_overwrite(Path(report_path), force)

    model = serialize.load_model(model_path)
    scores = explain.feature_importance(model)
    rows = list(scores.items())[:top]
    pd.DataFrame(rows, columns=["name", "score"]).to_csv(out, index=False)

    report = explain.rule_report(model)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if not scores:
        click.echo("warning: model has no rules; importance file is empty", err=True)
    click.echo(f"wrote {out} ({len(rows)} rows)")
    click.echo(explain.render_rule_report(report))


def run(argv=None) -> int:
    """Invoke the CLI and translate failures to documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (EblrError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
