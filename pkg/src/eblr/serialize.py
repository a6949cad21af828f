"""Model persistence: a versioned JSON document.

The file stores estimator parameters, the raw-column metadata, every
generated rule as structured conditions (plus its canonical string for
display), the final linear model, the iteration log and the training
residual vector.  Only the selected rules are stored, never the trees
they came from, so the payload grows with the number and length of rules
only.  Loading reproduces predictions bit-for-bit: floats round-trip
exactly through JSON's shortest-repr encoding.
"""

from __future__ import annotations

import json

import numpy as np

from .boosting import EBLRRegressor, IterationRecord
from .data import ColumnInfo, Covariate
from .errors import ModelIOError
from .linear import LinearModel
from .quantiles import ResidualQuantiles
from .tree import Condition, RuleFeature

SCHEMA_VERSION = 1


def _rule_to_dict(rule: RuleFeature) -> dict:
    return {
        "conditions": [[c.column, c.relation, c.value] for c in rule.conditions],
        "source_iteration": rule.source_iteration,
        "leaf_mean": rule.leaf_mean,
        "leaf_share": rule.leaf_share,
        "canonical": rule.canonical(),
    }


def _rule_from_dict(d: dict) -> RuleFeature:
    conditions = tuple(Condition(col, rel, val) for col, rel, val in d["conditions"])
    return RuleFeature(conditions, d["source_iteration"], d["leaf_mean"], d["leaf_share"])


def model_to_dict(model: EBLRRegressor) -> dict:
    model._check_fitted()
    lm = model.model_
    schema = getattr(model, "schema_", None)
    return {
        "schema_version": SCHEMA_VERSION,
        "params": model.get_params(),
        "column_info": [[c.name, c.kind, c.source, c.level] for c in model.column_info_],
        "covariate_schema": ([[c.name, c.kind, list(c.levels)] for c in schema]
                             if schema is not None else None),
        "calendar_expanded": bool(getattr(model, "calendar_expanded_", False)),
        "rules": [_rule_to_dict(r) for r in model.rules_],
        "final_model": {
            "intercept": lm.intercept,
            "coefficients": {n: float(c) for n, c in zip(lm.column_names, lm.coefficients)},
            "column_names": lm.column_names,
            "standardization": {n: list(v) for n, v in lm.standardization.items()},
            "warnings": lm.warnings,
        },
        "base_nrmse": model.base_nrmse_,
        "iteration_log": [
            {"iteration": rec.iteration, "rule": _rule_to_dict(rec.rule),
             "train_nrmse": rec.train_nrmse}
            for rec in model.iteration_log_
        ],
        "training_residuals": [float(r) for r in model.training_residuals_],
    }


def model_from_dict(doc: dict) -> EBLRRegressor:
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelIOError("not a model document: missing schema_version")
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise ModelIOError(f"unsupported model schema_version {version!r}; "
                           f"this build reads version {SCHEMA_VERSION}")
    try:
        model = EBLRRegressor(**doc["params"])
        model.column_info_ = [ColumnInfo(n, k, s, l) for n, k, s, l in doc["column_info"]]
        model.feature_names_in_ = np.asarray([c.name for c in model.column_info_],
                                             dtype=object)
        model.n_features_in_ = len(model.column_info_)
        cov = doc.get("covariate_schema")
        if cov is not None:
            model.schema_ = [Covariate(n, k, tuple(levels)) for n, k, levels in cov]
        model.calendar_expanded_ = bool(doc.get("calendar_expanded", False))
        model.rules_ = [_rule_from_dict(d) for d in doc["rules"]]
        fm = doc["final_model"]
        names = fm["column_names"]
        model.model_ = LinearModel(
            intercept=float(fm["intercept"]),
            coefficients=np.array([fm["coefficients"][n] for n in names], dtype=float),
            column_names=list(names),
            standardization={n: tuple(v) for n, v in fm["standardization"].items()},
            warnings=list(fm.get("warnings", [])),
        )
        model.base_nrmse_ = float(doc["base_nrmse"])
        model.iteration_log_ = [
            IterationRecord(rec["iteration"], _rule_from_dict(rec["rule"]),
                            float(rec["train_nrmse"]))
            for rec in doc["iteration_log"]
        ]
        model.training_residuals_ = np.asarray(doc["training_residuals"], dtype=float)
        model.residual_quantiles_ = ResidualQuantiles.from_residuals(
            model.training_residuals_)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed model document: {exc}") from exc
    return model


def save_model(model: EBLRRegressor, path) -> None:
    """Write the model as UTF-8 JSON (deterministic key order)."""
    doc = model_to_dict(model)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> EBLRRegressor:
    """Read a model document written by :func:`save_model`."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(doc)
