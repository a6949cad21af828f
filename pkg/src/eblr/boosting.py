"""The boosting loop: a linear learner iteratively augmented with rule features.

:class:`EBLRRegressor` is a scikit-learn style estimator.  Each boosting
iteration fits the linear base learner, grows a pruned regression tree on
the residuals over all raw columns, converts the terminal node with the
largest absolute mean residual into a binary rule feature, appends it to
the feature set and refits.  The loop stops at ``f_max`` features, when
the tree cannot split, when the selected rule duplicates an earlier one,
or when training error stops improving.  Afterwards the raw columns are
(optionally) unioned in and the learner is refit once; that final model
plus its training residuals is what predictions and quantile forecasts
use.

Panel-level helpers (:func:`fit_eblr`, :func:`predict_point`,
:func:`predict_quantiles`, :func:`prediction_interval`) wire the
estimator to :class:`~eblr.data.PanelDataset` inputs and keyed outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin

from . import data as _data
from .data import ColumnInfo, PanelDataset, VerticalMatrix, vertical_matrix
from .errors import DataError, FitError, PredictionError
from .linear import LassoConfig, LinearModel, fit_lasso, fit_ols
from .quantiles import (DEFAULT_RHOS, ForecastDistribution, ResidualQuantiles,
                        check_rhos, distributions, interval_rhos)
from .tree import RuleFeature, TreeConfig, apply_rule, fit_tree, select_worst_leaf

RULE_COLUMN_PREFIX = "rule:"

# Training RMSE below this fraction of the target scale counts as a perfect
# fit: the residuals are numerical dust and boosting stops.
_PERFECT_FIT_RTOL = 1e-9

# Training NRMSE may wiggle upward by at most this much (relative) before a
# newly added rule is judged harmful and rolled back.
_WORSEN_RTOL = 1e-9


@dataclass(frozen=True)
class IterationRecord:
    """Log entry for one completed boosting iteration.

    ``train_nrmse`` is measured after the rule joined the feature set.
    """

    iteration: int
    rule: RuleFeature
    train_nrmse: float


def rule_column_name(rule: RuleFeature) -> str:
    """Matrix column name for a generated rule (prefixed to avoid clashes
    with one-hot raw columns, whose names share the ``a=b`` shape)."""
    return RULE_COLUMN_PREFIX + rule.canonical()


class EBLRRegressor(BaseEstimator, RegressorMixin):
    """Linear regression boosted with tree-extracted binary rule features.

    Parameters
    ----------
    base_learner : {"ols", "lasso"}, default="ols"
        The linear learner refit at every iteration.
    f_max : int, default=5
        Maximum number of generated rule features (and loop iterations).
        0 disables boosting entirely, leaving a plain linear fit.
    eta : float, default=0.001
        Tree post-pruning threshold: splits whose SSE reduction is below
        ``eta`` times the root SSE are collapsed.
    min_leaf : int, default=5
        Minimum rows in a tree leaf.
    max_depth : int, default=8
        Maximum tree depth (bounds the rule length).
    initial_features : None, "raw" or sequence of str, default=None
        Feature set of the first fit.  None starts from an intercept-only
        model; "raw" starts from every input column.
    include_raw_at_end : bool, default=True
        Union all raw columns into the feature set for the final refit.
    min_relative_improvement : float, default=0.0
        Stop when an iteration improves training NRMSE by less than this
        fraction.  0 keeps going as long as the error does not worsen; a
        rule that worsens training error is rolled back.
    lam : float or "auto", default="auto"
        L1 penalty (lasso learner only); "auto" selects it by blocked
        cross-validation.
    cv_folds : int, default=5
        Folds for the penalty selection.
    lasso_max_iters : int, default=1000
    lasso_tol : float, default=1e-7
        Coordinate-descent sweep budget and convergence tolerance.

    Attributes
    ----------
    rules_ : list of RuleFeature, in generation order.
    model_ : LinearModel, the final refit.
    iteration_log_ : list of IterationRecord (length <= f_max).
    base_nrmse_ : float, training NRMSE of the pre-loop base fit.
    training_residuals_ : ndarray of final-model training residuals.
    residual_quantiles_ : ResidualQuantiles over those residuals.
    column_info_ : list of ColumnInfo for the raw training columns.
    """

    def __init__(self, base_learner="ols", f_max=5, eta=0.001, min_leaf=5,
                 max_depth=8, initial_features=None, include_raw_at_end=True,
                 min_relative_improvement=0.0, lam="auto", cv_folds=5,
                 lasso_max_iters=1000, lasso_tol=1e-7):
        self.base_learner = base_learner
        self.f_max = f_max
        self.eta = eta
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.initial_features = initial_features
        self.include_raw_at_end = include_raw_at_end
        self.min_relative_improvement = min_relative_improvement
        self.lam = lam
        self.cv_folds = cv_folds
        self.lasso_max_iters = lasso_max_iters
        self.lasso_tol = lasso_tol

    # -- input handling --------------------------------------------------------

    def _validate_params(self):
        if self.base_learner not in ("ols", "lasso"):
            raise FitError(f"base_learner must be 'ols' or 'lasso', "
                           f"got {self.base_learner!r}")
        if self.f_max < 0:
            raise FitError("f_max must be >= 0")
        if self.min_relative_improvement < 0:
            raise FitError("min_relative_improvement must be >= 0")
        try:
            TreeConfig(self.eta, self.min_leaf, self.max_depth)
        except DataError as exc:
            raise FitError(str(exc)) from exc

    def _lasso_config(self) -> LassoConfig:
        return LassoConfig(lam=self.lam, cv_folds=self.cv_folds,
                           max_iters=self.lasso_max_iters, tol=self.lasso_tol)

    @staticmethod
    def _infer_column_info(names, values) -> list[ColumnInfo]:
        info = []
        for i, name in enumerate(names):
            col = values[:, i]
            binary = bool(np.all((col == 0.0) | (col == 1.0))) if len(col) else False
            if binary and "=" in name:
                source, level = name.split("=", 1)
                info.append(ColumnInfo(name, "onehot", source, level))
            elif binary:
                info.append(ColumnInfo(name, "binary", name))
            else:
                info.append(ColumnInfo(name, "numeric", name))
        return info

    def _as_matrix(self, X, y=None, column_info=None, for_fit=True) -> VerticalMatrix:
        if isinstance(X, VerticalMatrix):
            if y is not None:
                raise FitError("pass targets inside the VerticalMatrix, not as y")
            return X
        if isinstance(X, pd.DataFrame):
            bad = [c for c in X.columns
                   if not pd.api.types.is_numeric_dtype(X[c])]
            if bad:
                raise DataError(f"non-numeric columns {bad}; one-hot encode "
                                f"categoricals or use the panel API")
            names = [str(c) for c in X.columns]
            values = X.to_numpy(dtype=float)
        else:
            values = np.asarray(X, dtype=float)
            if values.ndim != 2:
                raise DataError(f"expected a 2-D design, got shape {values.shape}")
            names = [f"x{i}" for i in range(values.shape[1])]
        if for_fit:
            if y is None:
                raise FitError("y is required when X is not a VerticalMatrix")
            target = np.asarray(y, dtype=float)
            if target.shape != (values.shape[0],):
                raise FitError(f"y has shape {target.shape}, expected "
                               f"({values.shape[0]},)")
            if not np.all(np.isfinite(target)):
                raise FitError("y contains non-finite values")
        else:
            target = np.full(values.shape[0], np.nan)
        if not np.all(np.isfinite(values)):
            raise DataError("design matrix contains non-finite values")
        if column_info is not None:
            info = list(column_info)
            if len(info) != values.shape[1]:
                raise DataError(f"column_info has {len(info)} entries for "
                                f"{values.shape[1]} columns")
        else:
            info = self._infer_column_info(names, values)
        keys = [("row", i) for i in range(values.shape[0])]
        return VerticalMatrix(values, target, info, keys)

    # -- fitting ----------------------------------------------------------------

    def _base_fit(self, M: VerticalMatrix) -> LinearModel:
        if self.base_learner == "lasso":
            return fit_lasso(M, self._lasso_config())
        return fit_ols(M)

    def _submatrix(self, M: VerticalMatrix, names: list[str]) -> VerticalMatrix:
        index = {c.name: i for i, c in enumerate(M.column_info)}
        cols = [index[n] for n in names]
        values = M.values[:, cols] if cols else np.empty((M.shape[0], 0))
        return VerticalMatrix(values, M.target,
                              [M.column_info[i] for i in cols], M.row_keys)

    def _initial_names(self, M: VerticalMatrix) -> list[str]:
        if self.initial_features is None:
            return []
        if isinstance(self.initial_features, str):
            if self.initial_features == "raw":
                return M.column_names
            if self.initial_features == "none":
                return []
            raise FitError(f"initial_features must be None, 'raw' or a list of "
                           f"column names, got {self.initial_features!r}")
        names = list(self.initial_features)
        unknown = [n for n in names if n not in M.column_names]
        if unknown:
            raise FitError(f"initial_features name unknown columns {unknown}")
        return names

    @staticmethod
    def _train_nrmse(y: np.ndarray, yhat: np.ndarray) -> float:
        denom = float(np.mean(np.abs(y)))
        rmse = float(np.sqrt(np.mean((yhat - y) ** 2)))
        return rmse / denom if denom > 0 else rmse

    def fit(self, X, y=None, column_info=None):
        """Run the boosting loop on a design matrix.

        ``X`` may be a :class:`VerticalMatrix` (targets included), a
        pandas DataFrame or a 2-D array with ``y``.  ``column_info``
        overrides the per-column kind inference when ``X`` is not a
        VerticalMatrix.
        """
        self._validate_params()
        M = self._as_matrix(X, y, column_info)
        n = M.shape[0]
        if n < 1:
            raise FitError("cannot fit on an empty dataset")
        target = M.target
        if not np.all(np.isfinite(target)):
            raise FitError("training targets must be finite")

        tree_cfg = TreeConfig(self.eta, self.min_leaf, self.max_depth)
        scale = max(1.0, float(np.mean(np.abs(target))))

        feature_names = self._initial_names(M)
        current = self._submatrix(M, feature_names)
        model = self._base_fit(current)
        residuals = target - model.predict(current)
        prev_nrmse = self._train_nrmse(target, target - residuals)

        rules: list[RuleFeature] = []
        log: list[IterationRecord] = []
        self.base_nrmse_ = prev_nrmse

        for k in range(1, self.f_max + 1):
            if float(np.sqrt(np.mean(residuals ** 2))) <= _PERFECT_FIT_RTOL * scale:
                break  # error cannot be improved further
            tree = fit_tree(M, residuals, tree_cfg)
            rule = select_worst_leaf(tree)
            if rule is None:
                break  # the tree cannot make a split
            rule = replace(rule, source_iteration=k)
            if any(rule.canonical() == r.canonical() for r in rules):
                break  # re-selected an existing rule

            column = apply_rule(rule, M)
            candidate = VerticalMatrix(
                np.column_stack([current.values, column]),
                target,
                current.column_info + [ColumnInfo(rule_column_name(rule), "binary",
                                                  rule_column_name(rule))],
                M.row_keys,
            )
            new_model = self._base_fit(candidate)
            new_residuals = target - new_model.predict(candidate)
            new_nrmse = self._train_nrmse(target, target - new_residuals)
            if new_nrmse > prev_nrmse * (1.0 + _WORSEN_RTOL):
                break  # the rule hurt the training fit; discard it

            current, model, residuals = candidate, new_model, new_residuals
            rules.append(rule)
            log.append(IterationRecord(k, rule, new_nrmse))
            improvement = ((prev_nrmse - new_nrmse) / prev_nrmse
                           if prev_nrmse > 0 else 0.0)
            prev_nrmse = new_nrmse
            if improvement < self.min_relative_improvement:
                break

        if self.include_raw_at_end:
            have = set(current.column_names)
            extra = [c for c in M.column_names if c not in have]
            if extra:
                sub = self._submatrix(M, extra)
                current = VerticalMatrix(
                    np.column_stack([current.values, sub.values])
                    if current.shape[1] else sub.values,
                    target,
                    current.column_info + sub.column_info,
                    M.row_keys,
                )
            model = self._base_fit(current)
            residuals = target - model.predict(current)

        self.column_info_ = list(M.column_info)
        self.feature_names_in_ = np.asarray(M.column_names, dtype=object)
        self.n_features_in_ = M.shape[1]
        self.rules_ = rules
        self.model_ = model
        self.iteration_log_ = log
        self.training_residuals_ = residuals
        self.residual_quantiles_ = ResidualQuantiles.from_residuals(residuals)
        return self

    # -- prediction --------------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise PredictionError("this EBLRRegressor instance is not fitted yet")

    def _augmented(self, M: VerticalMatrix) -> VerticalMatrix:
        cols = [M.values] if M.shape[1] else []
        info = list(M.column_info)
        for rule in self.rules_:
            cols.append(apply_rule(rule, M).reshape(-1, 1))
            name = rule_column_name(rule)
            info.append(ColumnInfo(name, "binary", name))
        values = np.hstack(cols) if cols else np.empty((M.shape[0], 0))
        return VerticalMatrix(values, M.target, info, M.row_keys)

    def predict(self, X) -> np.ndarray:
        """Point forecasts for rows carrying all raw covariate columns."""
        self._check_fitted()
        M = self._as_matrix(X, column_info=self.column_info_
                            if isinstance(X, np.ndarray) else None, for_fit=False)
        return self.model_.predict(self._augmented(M))

    def predict_quantiles(self, X, rhos=DEFAULT_RHOS) -> np.ndarray:
        """Quantile forecasts, shape (n_rows, len(rhos)).

        Each quantile is the point forecast plus the corresponding
        training-residual quantile, so offsets are identical across rows.
        """
        self._check_fitted()
        rhos = check_rhos(rhos)
        points = self.predict(X)
        offsets = self.residual_quantiles_.offsets(rhos)
        return points[:, None] + offsets[None, :]

    def predict_distributions(self, X, rhos=DEFAULT_RHOS) -> list[ForecastDistribution]:
        self._check_fitted()
        return distributions(self.predict(X), self.residual_quantiles_, rhos)

    def prediction_interval(self, X, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        """Equal-tailed interval with coverage ``alpha``: quantiles at
        (1 - alpha)/2 and (1 + alpha)/2."""
        self._check_fitted()
        lo, hi = interval_rhos(alpha)
        q = self.predict_quantiles(X, (lo, hi))
        return q[:, 0], q[:, 1]


# -- panel-level API ---------------------------------------------------------------


def fit_eblr(train: PanelDataset, estimator: EBLRRegressor | None = None,
             expand_calendar: bool = False, **params) -> EBLRRegressor:
    """Fit an :class:`EBLRRegressor` on a panel dataset.

    Either pass a configured ``estimator`` or keyword parameters for a
    fresh one.  The covariate schema (after optional calendar expansion)
    is snapshotted on the estimator so that future datasets are encoded
    identically at prediction time.
    """
    if estimator is not None and params:
        raise FitError("pass either an estimator or keyword parameters, not both")
    est = estimator if estimator is not None else EBLRRegressor(**params)
    if train.n_rows == 0:
        raise FitError("training dataset is empty")
    ds = _data.expand_calendar(train) if expand_calendar else train
    est.fit(vertical_matrix(ds))
    est.schema_ = list(ds.schema)
    est.calendar_expanded_ = expand_calendar
    return est


def _future_matrix(model: EBLRRegressor, future: PanelDataset) -> tuple[VerticalMatrix, pd.DataFrame]:
    model._check_fitted()
    schema = getattr(model, "schema_", None)
    if schema is None:
        raise PredictionError("model was not fitted through the panel API; "
                              "call predict() on a design matrix instead")
    ds = _data.expand_calendar(future) if getattr(model, "calendar_expanded_", False) else future
    return vertical_matrix(ds, schema=schema), ds.frame


def quantile_label(rho: float) -> str:
    """Column label for a quantile level: 0.05 -> "q05", 0.5 -> "q50"."""
    pct = 100.0 * rho
    if abs(pct - round(pct)) < 1e-9:
        return f"q{round(pct):02d}"
    return f"q{pct:g}"


def predict_point(model: EBLRRegressor, future: PanelDataset) -> pd.DataFrame:
    """Point forecasts keyed by (series_id, timestamp)."""
    M, frame = _future_matrix(model, future)
    out = frame[[_data.SERIES_COL, _data.TIME_COL]].copy()
    out["point"] = model.model_.predict(model._augmented(M))
    return out


def predict_quantiles(model: EBLRRegressor, future: PanelDataset,
                      rhos=DEFAULT_RHOS) -> pd.DataFrame:
    """Point plus quantile forecasts keyed by (series_id, timestamp)."""
    rhos = check_rhos(rhos)
    M, frame = _future_matrix(model, future)
    points = model.model_.predict(model._augmented(M))
    offsets = model.residual_quantiles_.offsets(rhos)
    out = frame[[_data.SERIES_COL, _data.TIME_COL]].copy()
    out["point"] = points
    for rho, off in zip(rhos, offsets):
        out[quantile_label(rho)] = points + off
    return out


def prediction_interval(model: EBLRRegressor, future: PanelDataset,
                        alpha: float) -> pd.DataFrame:
    """Equal-tailed interval forecasts keyed by (series_id, timestamp)."""
    lo, hi = interval_rhos(alpha)
    M, frame = _future_matrix(model, future)
    points = model.model_.predict(model._augmented(M))
    out = frame[[_data.SERIES_COL, _data.TIME_COL]].copy()
    out["point"] = points
    out["lower"] = points + model.residual_quantiles_.quantile(lo)
    out["upper"] = points + model.residual_quantiles_.quantile(hi)
    return out
