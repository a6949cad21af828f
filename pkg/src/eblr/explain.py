"""Interpretability outputs: rule reports, importances and learning curves.

Feature importance allocates each iteration's training-NRMSE drop (clipped
at zero) in full to every raw covariate appearing in that iteration's rule
conditions, then normalises the per-covariate totals to sum to one.
One-hot conditions already name their source covariate, so scores are
stated over the user-facing variables.
"""

from __future__ import annotations

from .boosting import EBLRRegressor, RULE_COLUMN_PREFIX


def feature_importance(model: EBLRRegressor) -> dict[str, float]:
    """Per-covariate scores in [0, 1], descending (ties by name).

    Returns an empty mapping for a model with no rules; all-zero scores
    when rules exist but produced no measurable error reduction.
    """
    model._check_fitted()
    totals: dict[str, float] = {}
    prev = model.base_nrmse_
    for rec in model.iteration_log_:
        delta = max(0.0, prev - rec.train_nrmse)
        for cov in rec.rule.covariates:
            totals[cov] = totals.get(cov, 0.0) + delta
        prev = rec.train_nrmse
    grand = sum(totals.values())
    if grand > 0.0:
        totals = {name: score / grand for name, score in totals.items()}
    return dict(sorted(totals.items(), key=lambda kv: (-kv[1], kv[0])))


def rule_report(model: EBLRRegressor) -> dict:
    """Structured report: one entry per rule plus the raw-coefficient table.

    Rule coefficients are the final model's coefficients on the 0/1 rule
    columns, so the sign reads directly as the direction of the effect.
    """
    model._check_fitted()
    lm = model.model_
    coef = dict(zip(lm.column_names, (float(c) for c in lm.coefficients)))
    rules = []
    for rec in model.iteration_log_:
        rule = rec.rule
        c = coef.get(RULE_COLUMN_PREFIX + rule.canonical(), 0.0)
        rules.append({
            "iteration": rec.iteration,
            "rule": rule.canonical(),
            "leaf_mean": rule.leaf_mean,
            "leaf_share": rule.leaf_share,
            "coefficient": c,
            "effect": "increases" if c > 0 else ("decreases" if c < 0 else "none"),
            "train_nrmse": rec.train_nrmse,
        })
    raw = {n: v for n, v in coef.items() if not n.startswith(RULE_COLUMN_PREFIX)}
    return {"intercept": lm.intercept, "rules": rules, "raw_coefficients": raw}


def render_rule_report(report: dict) -> str:
    """Human-readable text for a :func:`rule_report` result."""
    lines = [f"intercept: {report['intercept']:.6g}"]
    if report["rules"]:
        lines.append("rules (in generation order):")
        for r in report["rules"]:
            lines.append(
                f"  [{r['iteration']}] {r['rule']}  coef={r['coefficient']:+.6g} "
                f"({r['effect']} the forecast); leaf mean {r['leaf_mean']:+.6g}, "
                f"share {100 * r['leaf_share']:.1f}%")
    else:
        lines.append("rules: none generated")
    if report["raw_coefficients"]:
        lines.append("raw-feature coefficients:")
        for name, v in report["raw_coefficients"].items():
            lines.append(f"  {name}: {v:+.6g}")
    return "\n".join(lines)


def learning_curve(model: EBLRRegressor) -> list[tuple[int, float]]:
    """(iteration, training NRMSE) pairs; iteration 0 is the pre-loop fit."""
    model._check_fitted()
    curve = [(0, model.base_nrmse_)]
    curve.extend((rec.iteration, rec.train_nrmse) for rec in model.iteration_log_)
    return curve
