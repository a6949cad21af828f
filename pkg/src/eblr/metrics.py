"""Forecast accuracy metrics: NRMSE, ND and weighted scaled pinball loss."""

from __future__ import annotations

import numpy as np

from .errors import MetricError


def _check_pair(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise MetricError(f"expected equal-length vectors, got {y.shape} and {yhat.shape}")
    if y.size == 0:
        raise MetricError("metrics are undefined on empty vectors")
    return y, yhat


def nrmse(y, yhat) -> float:
    """Root mean squared error divided by the mean absolute target."""
    y, yhat = _check_pair(y, yhat)
    denom = float(np.mean(np.abs(y)))
    if denom == 0.0:
        raise MetricError("NRMSE is undefined when mean(|y|) = 0")
    return float(np.sqrt(np.mean((yhat - y) ** 2)) / denom)


def nd(y, yhat) -> float:
    """Sum of absolute errors divided by the sum of absolute targets."""
    y, yhat = _check_pair(y, yhat)
    denom = float(np.sum(np.abs(y)))
    if denom == 0.0:
        raise MetricError("ND is undefined when sum(|y|) = 0")
    return float(np.sum(np.abs(yhat - y)) / denom)


def wspl(y, yhat_rho, rho: float) -> float:
    """Pinball loss at level ``rho``, scaled by the sum of absolute targets."""
    if not 0.0 < rho < 1.0:
        raise MetricError(f"quantile level {rho} outside the open interval (0, 1)")
    y, yhat_rho = _check_pair(y, yhat_rho)
    denom = float(np.sum(np.abs(y)))
    if denom == 0.0:
        raise MetricError("WSPL is undefined when sum(|y|) = 0")
    loss = np.maximum(rho * (y - yhat_rho), (1.0 - rho) * (yhat_rho - y))
    return float(np.sum(loss) / denom)
