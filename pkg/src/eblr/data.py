"""Panel time-series data: representation, CSV ingestion and design matrices.

A :class:`PanelDataset` holds one or more evenly spaced series in long
format together with a covariate schema.  Module functions provide CSV
loading, calendar-covariate expansion, a seeded synthetic generator,
train/test splitting and the flattened ("vertical") numeric matrix that
the estimators consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError

SERIES_COL = "series_id"
TIME_COL = "timestamp"
TARGET_COL = "target"

# Characters reserved by the rule-condition grammar; covariate names must
# not contain them or generated column names would be ambiguous.
_RESERVED_NAME_CHARS = set("=<>!&:")

_DOW_LEVELS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

_SYNTH_START = "2015-06-01"  # a Monday, so the weekly cycle starts on day 1
_SYNTH_SERIES_ID = "synthetic"


@dataclass(frozen=True)
class Covariate:
    """One schema entry: a named covariate and its kind.

    ``levels`` is only meaningful for categorical covariates and fixes
    the one-hot encoding order.
    """

    name: str
    kind: str  # "numeric" | "binary" | "categorical"
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "binary", "categorical"):
            raise SchemaError(f"unknown covariate kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and not self.levels:
            raise SchemaError(f"categorical covariate {self.name!r} declares no levels")
        bad = _RESERVED_NAME_CHARS.intersection(self.name)
        if bad or not self.name or self.name != self.name.strip():
            raise SchemaError(
                f"covariate name {self.name!r} is empty, padded, or uses reserved "
                f"characters {''.join(sorted(_RESERVED_NAME_CHARS))!r}"
            )


@dataclass(frozen=True)
class Observation:
    """A single row of a series: timestamp, target value and covariates."""

    timestamp: object
    target: float
    covariates: dict


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic daily-sales generator.

    The generator draws a promotion indicator for every day, overlays a
    weekly weekend cycle, and produces the target as an AR(2) level
    process plus additive weekend/promotion/interaction effects (see
    :func:`generate_synthetic`).
    """

    length: int
    noise_mean: float = 5000.0
    noise_std: float = 150.0
    ar1: float = -0.4
    ar2: float = 0.5
    weekend_effect: float = 3000.0
    promo_effect: float = 1500.0
    interaction_effect: float = 5500.0
    promo_probability: float = 0.4
    rng_seed: int = 42

    def __post_init__(self):
        if self.length < 1:
            raise DataError("synthetic length must be >= 1")
        if self.noise_std < 0:
            raise DataError("noise_std must be >= 0")
        if not 0.0 <= self.promo_probability <= 1.0:
            raise DataError("promo_probability must lie in [0, 1]")


class PanelDataset:
    """N evenly spaced time series with per-observation covariates.

    Rows are kept in a long-format frame sorted by (series, timestamp).
    Construction validates every invariant: no missing cells, strictly
    increasing evenly spaced timestamps per series, binary covariates in
    {0, 1} and categorical values drawn from their declared level sets.
    Instances are treated as immutable; all operations return new
    datasets.
    """

    def __init__(self, frame: pd.DataFrame, schema: Sequence[Covariate],
                 require_target: bool = True):
        schema = list(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate covariate names in schema: {names}")
        expected = [SERIES_COL, TIME_COL, TARGET_COL] + names
        missing = [c for c in expected if c not in frame.columns]
        if missing:
            raise SchemaError(f"frame is missing columns {missing}")

        frame = frame.loc[:, expected].copy()
        frame = frame.sort_values([SERIES_COL, TIME_COL], kind="mergesort")
        frame = frame.reset_index(drop=True)

        self._frame = frame
        self.schema = schema
        self.has_target = require_target
        self._validate()

    # -- construction helpers -------------------------------------------------

    def _validate(self):
        f = self._frame
        if len(f) == 0:
            return
        target = f[TARGET_COL].to_numpy()
        if self.has_target:
            target = np.asarray(target, dtype=float)
            if not np.all(np.isfinite(target)):
                bad = int(np.flatnonzero(~np.isfinite(target))[0])
                raise DataError(f"non-finite target at row {bad} "
                                f"(series {f[SERIES_COL].iat[bad]!r}, "
                                f"timestamp {f[TIME_COL].iat[bad]!r})")
            self._frame[TARGET_COL] = target

        dup = f.duplicated([SERIES_COL, TIME_COL])
        if dup.any():
            bad = int(np.flatnonzero(dup.to_numpy())[0])
            raise DataError(f"duplicate (series_id, timestamp) pair at row {bad}: "
                            f"({f[SERIES_COL].iat[bad]!r}, {f[TIME_COL].iat[bad]!r})")

        for sid, sub in f.groupby(SERIES_COL, sort=False):
            ts = sub[TIME_COL].to_numpy()
            if len(ts) >= 2:
                diffs = np.diff(ts)
                if not np.all(diffs == diffs[0]):
                    raise DataError(f"series {sid!r} is not evenly spaced")
                if not diffs[0] > diffs[0] - diffs[0]:  # zero of the step's type
                    raise DataError(f"series {sid!r} timestamps are not strictly increasing")

        for cov in self.schema:
            col = f[cov.name]
            if cov.kind in ("numeric", "binary"):
                vals = np.asarray(col.to_numpy(), dtype=float)
                if not np.all(np.isfinite(vals)):
                    raise DataError(f"covariate {cov.name!r} has missing or non-finite values")
                if cov.kind == "binary" and not np.all((vals == 0.0) | (vals == 1.0)):
                    raise DataError(f"binary covariate {cov.name!r} takes values outside {{0, 1}}")
                self._frame[cov.name] = vals
            else:
                vals = col.astype(str)
                if col.isna().any():
                    raise DataError(f"covariate {cov.name!r} has missing values")
                unknown = set(vals.unique()) - set(cov.levels)
                if unknown:
                    raise DataError(f"categorical covariate {cov.name!r} has undeclared "
                                    f"levels {sorted(unknown)}")
                self._frame[cov.name] = vals

    # -- basic accessors -------------------------------------------------------

    @property
    def frame(self) -> pd.DataFrame:
        """The validated long-format frame (do not mutate)."""
        return self._frame

    @property
    def covariate_names(self) -> list[str]:
        return [c.name for c in self.schema]

    @property
    def series_ids(self) -> list:
        return list(self._frame[SERIES_COL].drop_duplicates())

    @property
    def n_rows(self) -> int:
        return len(self._frame)

    def series_frame(self, series_id) -> pd.DataFrame:
        sub = self._frame[self._frame[SERIES_COL] == series_id]
        if len(sub) == 0:
            raise DataError(f"unknown series {series_id!r}")
        return sub

    def observations(self, series_id) -> list[Observation]:
        sub = self.series_frame(series_id)
        names = self.covariate_names
        return [
            Observation(row[TIME_COL], row[TARGET_COL],
                        {n: row[n] for n in names})
            for _, row in sub.iterrows()
        ]

    def with_frame(self, frame: pd.DataFrame, schema=None) -> "PanelDataset":
        return PanelDataset(frame, self.schema if schema is None else schema,
                            require_target=self.has_target)

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return self.schema == other.schema and self._frame.equals(other._frame)


@dataclass(frozen=True)
class ColumnInfo:
    """Metadata for one column of the vertical matrix.

    ``kind`` is "numeric", "binary" or "onehot"; one-hot columns remember
    the source categorical covariate and the encoded level so tree splits
    can be rendered as equality conditions on the original covariate.
    """

    name: str
    kind: str
    source: str
    level: str | None = None


@dataclass
class VerticalMatrix:
    """All observations flattened to an (n_rows, n_features) float matrix."""

    values: np.ndarray
    target: np.ndarray
    column_info: list[ColumnInfo]
    row_keys: list[tuple]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.column_info]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.column_names.index(name)
        except ValueError:
            raise KeyError(name) from None
        return self.values[:, idx]


@dataclass(frozen=True)
class CsvSchema:
    """Column-role mapping for :func:`load_panel_csv`.

    ``covariates=None`` means "every column not claimed by another role".
    ``target=None`` admits covariate-only files (future rows to forecast).
    """

    timestamp: str = TIME_COL
    target: str | None = TARGET_COL
    series_id: str | None = None
    covariates: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        known = {"timestamp", "target", "series_id", "covariates"}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown schema keys {sorted(unknown)}")
        cov = d.get("covariates")
        return cls(
            timestamp=d.get("timestamp", TIME_COL),
            target=d.get("target", TARGET_COL),
            series_id=d.get("series_id"),
            covariates=tuple(cov) if cov is not None else None,
        )


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    """Parse a timestamp column as integer index or ISO-8601 instants."""
    numeric = pd.to_numeric(raw, errors="coerce")
    if not numeric.isna().any():
        values = numeric.to_numpy(dtype=float)
        if not np.all(values == np.floor(values)):
            raise DataError("numeric timestamps must be an integer time index")
        return pd.Series(values.astype(np.int64), index=raw.index)
    try:
        return pd.to_datetime(raw, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"cannot parse timestamp column: {exc}") from exc


def _infer_covariate(name: str, col: pd.Series) -> Covariate:
    numeric = pd.to_numeric(col, errors="coerce")
    if not numeric.isna().any():
        vals = numeric.to_numpy(dtype=float)
        if np.all((vals == 0.0) | (vals == 1.0)):
            return Covariate(name, "binary")
        return Covariate(name, "numeric")
    levels = tuple(sorted(col.astype(str).unique()))
    return Covariate(name, "categorical", levels)


def load_panel_csv(path, schema: CsvSchema | None = None) -> PanelDataset:
    """Load a long-format CSV into a :class:`PanelDataset`.

    The file must be UTF-8 with a header row.  Roles are assigned by
    ``schema``; with no ``series_id`` column a single implicit series is
    assumed.  Covariate kinds are inferred from the data: {0,1}-valued
    columns become binary, other numeric columns numeric, and anything
    else categorical with lexicographically ordered levels.  Rows may
    arrive in any order; they are sorted by (series, timestamp).
    """
    schema = schema or CsvSchema()
    try:
        raw = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DataError(f"cannot read CSV {path}: {exc}") from exc

    roles = [schema.timestamp]
    if schema.target is not None:
        roles.append(schema.target)
    if schema.series_id is not None:
        roles.append(schema.series_id)
    missing = [c for c in roles if c not in raw.columns]
    if missing:
        raise SchemaError(f"CSV {path} is missing mapped columns {missing}; "
                          f"found {list(raw.columns)}")

    if schema.covariates is None:
        cov_cols = [c for c in raw.columns if c not in roles]
    else:
        cov_cols = list(schema.covariates)
        absent = [c for c in cov_cols if c not in raw.columns]
        if absent:
            raise SchemaError(f"CSV {path} is missing covariate columns {absent}")
    clash = [c for c in cov_cols if c in (SERIES_COL, TIME_COL, TARGET_COL)]
    if clash:
        raise SchemaError(f"columns {clash} collide with reserved internal names; "
                          f"map them to their role in the schema or rename them")

    out = pd.DataFrame()
    out[SERIES_COL] = (raw[schema.series_id].astype(str) if schema.series_id
                       else np.repeat("series", len(raw)))
    out[TIME_COL] = _parse_timestamps(raw[schema.timestamp])

    if schema.target is not None:
        target = pd.to_numeric(raw[schema.target], errors="coerce").to_numpy(dtype=float)
        if not np.all(np.isfinite(target)):
            bad = int(np.flatnonzero(~np.isfinite(target))[0])
            raise DataError(
                f"target column {schema.target!r} is missing or non-finite at "
                f"data row {bad} (CSV line {bad + 2})")
        out[TARGET_COL] = target
    else:
        out[TARGET_COL] = np.nan

    covs = []
    for name in cov_cols:
        cov = _infer_covariate(name, raw[name])
        covs.append(cov)
        out[name] = raw[name].astype(str) if cov.kind == "categorical" else \
            pd.to_numeric(raw[name]).astype(float)

    return PanelDataset(out, covs, require_target=schema.target is not None)


def expand_calendar(ds: PanelDataset) -> PanelDataset:
    """Add calendar covariates derived from datetime timestamps.

    Adds categorical day_of_week / day_of_month / month / year plus a
    binary is_weekend column.  Columns already present are left alone, so
    applying the expansion twice is the identity.  Target values and
    existing covariates are never modified.
    """
    f = ds.frame
    if len(f) and not pd.api.types.is_datetime64_any_dtype(f[TIME_COL]):
        raise DataError("calendar expansion needs datetime timestamps, "
                        "not an integer time index")

    ts = pd.DatetimeIndex(f[TIME_COL])
    existing = set(ds.covariate_names)
    new_frame = f.copy()
    new_schema = list(ds.schema)

    def add(cov: Covariate, values):
        if cov.name in existing:
            return
        new_frame[cov.name] = values
        new_schema.append(cov)

    add(Covariate("day_of_week", "categorical", _DOW_LEVELS),
        np.array(_DOW_LEVELS, dtype=object)[ts.weekday] if len(f) else [])
    add(Covariate("day_of_month", "categorical", tuple(str(d) for d in range(1, 32))),
        ts.day.astype(str))
    add(Covariate("month", "categorical", tuple(str(m) for m in range(1, 13))),
        ts.month.astype(str))
    years = tuple(sorted({str(y) for y in ts.year})) if len(f) else ("1970",)
    add(Covariate("year", "categorical", years), ts.year.astype(str))
    add(Covariate("is_weekend", "binary"),
        (ts.weekday >= 5).astype(float))

    return PanelDataset(new_frame, new_schema, require_target=ds.has_target)


def generate_synthetic(cfg: SynthConfig) -> PanelDataset:
    """Generate one synthetic daily-sales series.

    Every day gets a Bernoulli(``promo_probability``) promotion flag and
    an is-weekend flag from the repeating Mon..Sun cycle (weekend = days
    6 and 7).  The target is an AR(2) level process driven by Gaussian
    innovations, initialised at zero, with the weekend, promotion and
    weekend-and-promotion effects added on top of the level::

        z[t] = ar1 * z[t-1] + ar2 * z[t-2] + Normal(noise_mean, noise_std)
        y[t] = z[t] + weekend_effect * W[t] + promo_effect * P[t]
                    + interaction_effect * W[t] * P[t]

    with ``z[0] = z[1] = 0``.  The same config always yields a
    bit-identical dataset: the promotion flags are drawn first, then all
    innovations, from one generator seeded with ``rng_seed``.
    """
    T = cfg.length
    rng = np.random.default_rng(cfg.rng_seed)
    promo = (rng.random(T) < cfg.promo_probability).astype(float)
    noise = rng.normal(cfg.noise_mean, cfg.noise_std, size=T)

    weekend = np.tile([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0], T // 7 + 1)[:T]

    z = np.zeros(T)
    for t in range(2, T):
        z[t] = cfg.ar1 * z[t - 1] + cfg.ar2 * z[t - 2] + noise[t]
    y = z + cfg.weekend_effect * weekend + cfg.promo_effect * promo \
        + cfg.interaction_effect * weekend * promo

    frame = pd.DataFrame({
        SERIES_COL: _SYNTH_SERIES_ID,
        TIME_COL: pd.date_range(_SYNTH_START, periods=T, freq="D"),
        TARGET_COL: y,
        "isWeekend": weekend,
        "isPromotion": promo,
    })
    schema = [Covariate("isWeekend", "binary"), Covariate("isPromotion", "binary")]
    return PanelDataset(frame, schema)


def split_train_test(ds: PanelDataset, horizon: int) -> tuple[PanelDataset, PanelDataset]:
    """Split the last ``horizon`` observations of every series into a test set.

    Covariates are retained on the test side (future covariate values are
    assumed known at forecast time).
    """
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    train_parts, test_parts = [], []
    for sid, sub in ds.frame.groupby(SERIES_COL, sort=False):
        if len(sub) < horizon + 1:
            raise DataError(f"series {sid!r} has {len(sub)} rows; "
                            f"need at least horizon + 1 = {horizon + 1}")
        train_parts.append(sub.iloc[:-horizon])
        test_parts.append(sub.iloc[-horizon:])
    return (ds.with_frame(pd.concat(train_parts, ignore_index=True)),
            ds.with_frame(pd.concat(test_parts, ignore_index=True)))


def vertical_matrix(ds: PanelDataset, schema: Sequence[Covariate] | None = None) -> VerticalMatrix:
    """Flatten a dataset to its numeric design matrix.

    Categorical covariates are one-hot encoded in deterministic order
    (schema order, then declared level order); binary and numeric columns
    pass through.  Passing an explicit ``schema`` (e.g. the schema
    snapshot of a trained model) encodes against that schema's level
    sets; values outside them encode as all-zero rows for that covariate.
    """
    schema = list(ds.schema) if schema is None else list(schema)
    own = {c.name for c in ds.schema}
    absent = [c.name for c in schema if c.name not in own]
    if absent:
        raise DataError(f"dataset lacks covariates {absent} required by the schema")

    f = ds.frame
    n = len(f)
    cols: list[np.ndarray] = []
    info: list[ColumnInfo] = []
    for cov in schema:
        if cov.kind in ("numeric", "binary"):
            cols.append(np.asarray(f[cov.name].to_numpy(), dtype=float))
            info.append(ColumnInfo(cov.name, cov.kind, cov.name))
        else:
            values = f[cov.name].astype(str).to_numpy() if n else np.array([], dtype=object)
            for level in cov.levels:
                cols.append((values == level).astype(float))
                info.append(ColumnInfo(f"{cov.name}={level}", "onehot", cov.name, level))

    values = np.column_stack(cols) if cols else np.empty((n, 0), dtype=float)
    target = np.asarray(f[TARGET_COL].to_numpy(), dtype=float)
    row_keys = list(zip(f[SERIES_COL].tolist(), f[TIME_COL].tolist()))
    return VerticalMatrix(values, target, info, row_keys)
