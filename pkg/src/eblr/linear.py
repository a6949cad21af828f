"""Linear base learners: ordinary least squares and L1-penalised regression.

Both fitters consume a :class:`~eblr.data.VerticalMatrix` and produce a
:class:`LinearModel` whose intercept and coefficients live on the original
column scale.  The L1 solver is cyclic coordinate descent on standardized
columns with an unpenalised intercept; the penalty is either fixed or
chosen by k-fold cross-validation on contiguous row blocks (rows are in
time order, so shuffled folds would leak).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import VerticalMatrix
from .errors import FitError, PredictionError

_CONSTANT_TOL = 1e-12


@dataclass
class LinearModel:
    """Intercept plus named coefficients, reported on the original scale.

    ``standardization`` records the per-column (mean, scale) used while
    fitting; a scale of 0.0 marks a constant column that was dropped (its
    coefficient is exactly 0).  OLS fits do not standardize and record
    (0, 1) for every column.
    """

    intercept: float
    coefficients: np.ndarray
    column_names: list[str]
    standardization: dict[str, tuple[float, float]]
    warnings: list[str] = field(default_factory=list)

    def predict(self, M: VerticalMatrix) -> np.ndarray:
        """Evaluate ``intercept + coefficients @ x`` row-wise.

        Columns are matched by name; extra columns in ``M`` are ignored.
        """
        names = M.column_names
        index = {n: i for i, n in enumerate(names)}
        missing = [n for n in self.column_names if n not in index]
        if missing:
            raise PredictionError(f"matrix lacks columns {missing} required by the model")
        out = np.full(M.shape[0], self.intercept, dtype=float)
        for name, coef in zip(self.column_names, self.coefficients):
            if coef != 0.0:
                out += coef * M.values[:, index[name]]
        return out


@dataclass(frozen=True)
class LassoConfig:
    """Settings for the L1 fitter.

    ``lam="auto"`` selects the penalty by ``cv_folds``-fold blocked
    cross-validation over ``lambda_grid`` (by default 50 log-spaced
    values from the smallest all-zeroing penalty down by 1e-4).
    """

    lam: float | str = "auto"
    cv_folds: int = 5
    lambda_grid: tuple[float, ...] | None = None
    max_iters: int = 1000
    tol: float = 1e-7

    def __post_init__(self):
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise FitError(f"lam must be a number or 'auto', got {self.lam!r}")
        elif self.lam < 0:
            raise FitError("lam must be >= 0")
        if self.cv_folds < 2:
            raise FitError("cv_folds must be >= 2")
        if self.max_iters < 1 or self.tol <= 0:
            raise FitError("max_iters must be >= 1 and tol > 0")
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=float)
            if len(grid) == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
                raise FitError("lambda_grid must be strictly descending positive reals")


def fit_ols(M: VerticalMatrix) -> LinearModel:
    """Least-squares fit with minimum-norm handling of rank deficiency.

    Solves via orthogonal decomposition (SVD least squares), never the
    normal equations, so duplicated or collinear columns yield the
    minimum-norm coefficient vector and well-defined predictions.
    """
    n = M.shape[0]
    if n < 1:
        raise FitError("cannot fit on an empty matrix")
    design = np.column_stack([np.ones(n), M.values])
    beta, *_ = np.linalg.lstsq(design, M.target, rcond=None)
    names = M.column_names
    return LinearModel(
        intercept=float(beta[0]),
        coefficients=np.asarray(beta[1:], dtype=float),
        column_names=list(names),
        standardization={name: (0.0, 1.0) for name in names},
    )


def _soft_threshold(a: float, lam: float) -> float:
    if a > lam:
        return a - lam
    if a < -lam:
        return a + lam
    return 0.0


def coordinate_descent(Z: np.ndarray, yc: np.ndarray, lam: float,
                       beta0: np.ndarray | None = None,
                       max_iters: int = 1000, tol: float = 1e-7):
    """Cyclic coordinate descent for (1/2n)||yc - Z b||^2 + lam * ||b||_1.

    ``yc`` must be centered and ``Z`` column-standardized.  Returns
    ``(beta, objectives, converged)`` where ``objectives`` holds the
    penalised objective after every full sweep (non-increasing by
    construction: each coordinate step is an exact minimisation).
    """
    n, F = Z.shape
    beta = np.zeros(F) if beta0 is None else beta0.astype(float).copy()
    col_sq = np.einsum("ij,ij->j", Z, Z)
    r = yc - Z @ beta
    objectives = []
    converged = False
    for _ in range(max_iters):
        max_delta = 0.0
        for j in range(F):
            if col_sq[j] <= 0.0:
                continue
            zj = Z[:, j]
            rho = zj @ r + beta[j] * col_sq[j]
            new = _soft_threshold(rho / n, lam) / (col_sq[j] / n)
            delta = new - beta[j]
            if delta != 0.0:
                r -= delta * zj
                beta[j] = new
            max_delta = max(max_delta, abs(delta))
        objectives.append(0.5 / n * float(r @ r) + lam * float(np.sum(np.abs(beta))))
        if max_delta < tol:
            converged = True
            break
    return beta, objectives, converged


def _standardize(X: np.ndarray):
    mu = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
    sd = X.std(axis=0) if len(X) else np.zeros(X.shape[1])
    keep = sd > _CONSTANT_TOL * np.maximum(1.0, np.abs(mu))
    Z = (X[:, keep] - mu[keep]) / sd[keep]
    return Z, mu, sd, keep


def _lambda_grid(Z: np.ndarray, yc: np.ndarray, size: int = 50) -> np.ndarray:
    lam_max = float(np.max(np.abs(Z.T @ yc)) / len(yc)) if Z.shape[1] else 1.0
    if lam_max <= 0.0:
        lam_max = 1.0
    return np.logspace(np.log10(lam_max), np.log10(lam_max * 1e-4), size)


def lasso_path(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray,
               max_iters: int = 1000, tol: float = 1e-7):
    """Warm-started solutions along a descending penalty grid.

    Returns ``(coefs, keep)``: standardized-scale coefficients of shape
    (len(lambdas), n_kept_columns) and the retained-column mask.
    """
    Z, mu, sd, keep = _standardize(X)
    yc = y - y.mean()
    coefs = np.zeros((len(lambdas), Z.shape[1]))
    beta = np.zeros(Z.shape[1])
    for i, lam in enumerate(lambdas):
        beta, _, _ = coordinate_descent(Z, yc, float(lam), beta0=beta,
                                        max_iters=max_iters, tol=tol)
        coefs[i] = beta
    return coefs, keep


def _cv_lambda(X: np.ndarray, y: np.ndarray, cfg: LassoConfig, grid: np.ndarray) -> float:
    """Mean validation MSE over contiguous-block folds, minimized over the grid."""
    n = len(y)
    blocks = np.array_split(np.arange(n), cfg.cv_folds)
    mse = np.zeros(len(grid))
    for block in blocks:
        mask = np.ones(n, dtype=bool)
        mask[block] = False
        Xtr, ytr = X[mask], y[mask]
        Xva, yva = X[block], y[block]
        Z, mu, sd, keep = _standardize(Xtr)
        yc = ytr - ytr.mean()
        beta = np.zeros(Z.shape[1])
        for i, lam in enumerate(grid):
            beta, _, _ = coordinate_descent(Z, yc, float(lam), beta0=beta,
                                            max_iters=cfg.max_iters, tol=cfg.tol)
            coef = beta / sd[keep]
            intercept = ytr.mean() - coef @ mu[keep]
            pred = intercept + Xva[:, keep] @ coef
            mse[i] += float(np.mean((pred - yva) ** 2))
    mse /= cfg.cv_folds
    return float(grid[int(np.argmin(mse))])  # descending grid: ties pick the larger lam


def fit_lasso(M: VerticalMatrix, cfg: LassoConfig | None = None) -> LinearModel:
    """L1-penalised least squares via coordinate descent.

    Columns are standardized to zero mean and unit variance (constant
    columns dropped), the intercept is unpenalised, and coefficients are
    reported back on the original scale.  Failure to converge within
    ``max_iters`` sweeps is recorded as a warning on the model, not an
    error.
    """
    cfg = cfg or LassoConfig()
    n, F = M.shape
    if n < 1:
        raise FitError("cannot fit on an empty matrix")
    X, y = M.values, M.target
    Z, mu, sd, keep = _standardize(X)
    yc = y - y.mean()

    warnings: list[str] = []
    if Z.shape[1] == 0:
        lam = 0.0
        beta = np.zeros(0)
    else:
        grid = (np.asarray(cfg.lambda_grid, dtype=float) if cfg.lambda_grid is not None
                else _lambda_grid(Z, yc))
        if cfg.lam == "auto":
            if n < cfg.cv_folds:
                raise FitError(f"need at least cv_folds={cfg.cv_folds} rows "
                               f"for penalty selection, got {n}")
            lam = _cv_lambda(X, y, cfg, grid)
        else:
            lam = float(cfg.lam)
        beta, _, converged = coordinate_descent(Z, yc, lam, max_iters=cfg.max_iters,
                                                tol=cfg.tol)
        if not converged:
            warnings.append(f"coordinate descent did not converge in "
                            f"{cfg.max_iters} sweeps (lam={lam:g})")

    names = M.column_names
    coefficients = np.zeros(F)
    coefficients[keep] = beta / sd[keep]
    intercept = float(y.mean() - coefficients[keep] @ mu[keep])
    standardization = {}
    for i, name in enumerate(names):
        standardization[name] = (float(mu[i]), float(sd[i])) if keep[i] else (float(mu[i]), 0.0)
    return LinearModel(intercept, coefficients, list(names), standardization,
                       warnings=warnings)
