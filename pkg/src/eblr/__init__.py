"""Explainable boosted linear regression for time-series forecasting.

A linear model is iteratively augmented with binary rule features
extracted from regression trees fitted to its residuals; the terminal
node with the largest absolute mean residual becomes a new feature each
round.  The package covers panel data handling, the boosting estimator,
empirical-quantile probabilistic forecasts, a rolling-origin backtest
harness, interpretability reports and a CLI.
"""

from .backtest import BacktestReport, WindowResult, backtest
from .boosting import (EBLRRegressor, IterationRecord, RULE_COLUMN_PREFIX,
                       fit_eblr, predict_point, predict_quantiles,
                       prediction_interval, quantile_label, rule_column_name)
from .data import (ColumnInfo, Covariate, CsvSchema, Observation, PanelDataset,
                   SynthConfig, VerticalMatrix, expand_calendar,
                   generate_synthetic, load_panel_csv, split_train_test,
                   vertical_matrix)
from .errors import (BacktestError, DataError, EblrError, FitError,
                     MetricError, ModelIOError, PredictionError, SchemaError)
from .explain import (feature_importance, learning_curve, render_rule_report,
                      rule_report)
from .linear import LassoConfig, LinearModel, fit_lasso, fit_ols
from .metrics import nd, nrmse, wspl
from .quantiles import (DEFAULT_RHOS, ForecastDistribution, ResidualQuantiles,
                        distributions, interval_rhos, residual_quantile)
from .serialize import load_model, save_model
from .tree import (Condition, Node, RegressionTree, RuleFeature, TreeConfig,
                   apply_rule, fit_tree, prune, select_worst_leaf, tree_predict)

__version__ = "0.1.0"

__all__ = [
    "BacktestError", "BacktestReport", "ColumnInfo", "Condition", "Covariate",
    "CsvSchema", "DEFAULT_RHOS", "DataError", "EBLRRegressor", "EblrError",
    "FitError", "ForecastDistribution", "IterationRecord", "LassoConfig",
    "LinearModel", "MetricError", "ModelIOError", "Node", "Observation",
    "PanelDataset", "PredictionError", "RULE_COLUMN_PREFIX", "RegressionTree",
    "ResidualQuantiles", "RuleFeature", "SchemaError", "SynthConfig",
    "TreeConfig", "VerticalMatrix", "WindowResult", "apply_rule", "backtest",
    "distributions", "expand_calendar", "feature_importance", "fit_eblr",
    "fit_lasso", "fit_ols", "fit_tree", "generate_synthetic", "interval_rhos",
    "learning_curve", "load_model", "load_panel_csv", "nd", "nrmse",
    "predict_point", "predict_quantiles", "prediction_interval", "prune",
    "quantile_label", "render_rule_report", "residual_quantile",
    "rule_column_name", "rule_report", "save_model", "select_worst_leaf",
    "split_train_test", "tree_predict", "vertical_matrix", "wspl",
]
