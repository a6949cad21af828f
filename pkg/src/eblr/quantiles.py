"""Probabilistic forecasts from the empirical distribution of residuals.

Quantile forecasts add residual order-statistic quantiles to the point
forecast, so a model carries one global residual distribution and every
forecast row gets the same additive offsets (constant-width intervals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

DEFAULT_RHOS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class ForecastDistribution:
    """Point forecast plus monotone quantile forecasts for one row."""

    point: float
    quantiles: tuple[tuple[float, float], ...]  # (rho, value), ascending in rho


@dataclass(frozen=True)
class ResidualQuantiles:
    """Sorted training residuals with a fixed interpolation rule.

    Quantiles interpolate linearly between order statistics at position
    ``(n - 1) * rho`` (zero-indexed), which is deterministic across
    platforms and serialises exactly.
    """

    residuals: tuple[float, ...]
    method: str = "linear-order-statistic"

    @classmethod
    def from_residuals(cls, residuals) -> "ResidualQuantiles":
        arr = np.asarray(residuals, dtype=float)
        if arr.size == 0:
            raise DataError("cannot build quantiles from an empty residual vector")
        if not np.all(np.isfinite(arr)):
            raise DataError("residual vector contains non-finite values")
        return cls(tuple(np.sort(arr).tolist()))

    def quantile(self, rho: float) -> float:
        return residual_quantile(self, rho)

    def offsets(self, rhos) -> np.ndarray:
        return np.array([residual_quantile(self, r) for r in check_rhos(rhos)])


def check_rhos(rhos) -> tuple[float, ...]:
    """Validate a quantile-level list: each in (0, 1), sorted ascending."""
    rhos = tuple(float(r) for r in rhos)
    if not rhos:
        raise DataError("need at least one quantile level")
    for r in rhos:
        if not 0.0 < r < 1.0:
            raise DataError(f"quantile level {r} outside the open interval (0, 1)")
    if any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise DataError(f"quantile levels must be strictly ascending, got {rhos}")
    return rhos


def residual_quantile(rq: ResidualQuantiles, rho: float) -> float:
    """Empirical quantile via linear interpolation between order statistics."""
    if not 0.0 < rho < 1.0:
        raise DataError(f"quantile level {rho} outside the open interval (0, 1)")
    arr = np.asarray(rq.residuals)
    position = (len(arr) - 1) * rho
    lo = int(np.floor(position))
    hi = int(np.ceil(position))
    frac = position - lo
    return float(arr[lo] * (1.0 - frac) + arr[hi] * frac)


def interval_rhos(alpha: float) -> tuple[float, float]:
    """Equal-tailed interval levels for a coverage ``alpha`` in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"coverage {alpha} outside the open interval (0, 1)")
    return (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0


def distributions(points: np.ndarray, rq: ResidualQuantiles, rhos) -> list[ForecastDistribution]:
    """Attach residual-quantile offsets to each point forecast."""
    rhos = check_rhos(rhos)
    offs = rq.offsets(rhos)
    return [
        ForecastDistribution(float(p), tuple((r, float(p + o)) for r, o in zip(rhos, offs)))
        for p in np.asarray(points, dtype=float)
    ]
