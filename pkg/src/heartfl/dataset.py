"""Ingestion and preprocessing of the four-center UCI heart-disease data.

The raw files are the ``processed.*.data`` distributions: 14 comma-separated
columns per line (13 inputs followed by ``num``), with ``?`` marking a
missing value.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, ParseError, SplitError

MISSING_TOKENS = frozenset({"?", ""})
ZERO_VARIANCE_TOL = 1e-12
DATA_DIR_ENV = "HEARTFL_DATA_DIR"


class Center(str, enum.Enum):
    CLEVELAND = "cleveland"
    HUNGARY = "hungary"
    SWITZERLAND = "switzerland"
    VA = "va"

    @property
    def filename(self) -> str:
        return _FILENAMES[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Center":
        key = text.strip().lower()
        for c in cls:
            if key in (c.value, c.label.lower()):
                return c
        raise ConfigError(f"unknown center {text!r}")


_FILENAMES = {
    Center.CLEVELAND: "processed.cleveland.data",
    Center.HUNGARY: "processed.hungarian.data",
    Center.SWITZERLAND: "processed.switzerland.data",
    Center.VA: "processed.va.data",
}
_LABELS = {
    Center.CLEVELAND: "Cleveland",
    Center.HUNGARY: "Hungary",
    Center.SWITZERLAND: "Switzerland",
    Center.VA: "VA",
}

# Fixed client order used everywhere a per-center loop appears.
CENTERS = (Center.CLEVELAND, Center.HUNGARY, Center.SWITZERLAND, Center.VA)


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"
    BINARY = "binary"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: Kind


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    target: str = "num"

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate feature names in schema: {names}")
        if self.target in names:
            raise ConfigError("target must not appear among the input features")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def kinds(self) -> tuple[Kind, ...]:
        return tuple(f.kind for f in self.features)

    def __len__(self):
        return len(self.features)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def subset(self, names: Iterable[str]) -> "FeatureSchema":
        """Schema restricted to ``names``, keeping this schema's order."""
        wanted = list(names)
        if not wanted:
            raise ConfigError("feature subset is empty")
        unknown = [n for n in wanted if n not in self.names]
        if unknown:
            raise ConfigError(f"features not in schema: {unknown}")
        keep = set(wanted)
        return FeatureSchema(tuple(f for f in self.features if f.name in keep), self.target)


_C, _K, _B = Kind.CONTINUOUS, Kind.CATEGORICAL, Kind.BINARY

UCI_SCHEMA = FeatureSchema((
    Feature("age", _C),
    Feature("sex", _B),
    Feature("cp", _K),
    Feature("trestbps", _C),
    Feature("chol", _C),
    Feature("fbs", _B),
    Feature("restecg", _K),
    Feature("thalach", _C),
    Feature("exang", _B),
    Feature("oldpeak", _C),
    Feature("slope", _K),
    Feature("ca", _K),
    Feature("thal", _K),
))

FULL_FEATURES = UCI_SCHEMA.names
# The ten features reported in the interpretability table (slope, ca, thal absent).
TABLE4_FEATURES = tuple(n for n in FULL_FEATURES if n not in ("slope", "ca", "thal"))
FEATURE_SETS = {"full": FULL_FEATURES, "table4": TABLE4_FEATURES}


@dataclass(frozen=True)
class RawRecord:
    values: tuple[float | None, ...]
    center: Center

    @property
    def label(self) -> float | None:
        return self.values[-1]


def parse_uci_file(data: bytes | str, center: Center | str) -> list[RawRecord]:
    """Parse one ``processed.*.data`` file into raw records.

    ``?`` and blank fields become ``None``. Blank lines are skipped.
    Raises :class:`ParseError` (carrying the 1-based line number) on a wrong
    field count or an unparsable number.
    """
    if isinstance(data, bytes):
        data = data.decode("ascii", errors="replace")
    center = center if isinstance(center, Center) else Center.parse(center)
    width = len(UCI_SCHEMA) + 1
    records = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.strip().split(",")
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, got {len(fields)}", lineno)
        values = []
        for tok in fields:
            tok = tok.strip()
            if tok in MISSING_TOKENS:
                values.append(None)
                continue
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"unparsable value {tok!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {tok!r}", lineno)
            values.append(v)
        records.append(RawRecord(tuple(values), center))
    return records


def resolve_data_dir(path: str | os.PathLike | None = None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise ConfigError(f"no data directory given and ${DATA_DIR_ENV} is not set")


def load_uci(data_dir: str | os.PathLike | None = None,
             centers: Sequence[Center] = CENTERS) -> list[RawRecord]:
    """Read and parse the raw files for ``centers`` from ``data_dir``.

    Records come back grouped by center in the order given.
    """
    root = resolve_data_dir(data_dir)
    records = []
    for c in centers:
        path = root / c.filename
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
        try:
            records.extend(parse_uci_file(raw, c))
        except ParseError as exc:
            raise ParseError(f"{path.name}: {exc}") from exc
    return records


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Complete-case feature matrix with binary labels and per-row center tags."""

    X: np.ndarray
    y: np.ndarray
    centers: np.ndarray
    schema: FeatureSchema = field(default=UCI_SCHEMA)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(X), -1)
        y = np.asarray(self.y, dtype=np.int64)
        centers = np.asarray(self.centers, dtype=object)
        if not (len(X) == len(y) == len(centers)):
            raise ContractError("rows, labels and centers differ in length")
        if X.shape[1] != len(self.schema):
            raise ContractError(
                f"{X.shape[1]} columns but schema has {len(self.schema)} features")
        if np.isnan(X).any():
            raise ContractError("dataset contains missing values")
        if not np.isin(y, (0, 1)).all():
            raise ContractError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "centers", centers)

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "TabularDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return TabularDataset(self.X[idx], self.y[idx], self.centers[idx], self.schema)

    def with_features(self, X: np.ndarray) -> "TabularDataset":
        return TabularDataset(X, self.y, self.centers, self.schema)

    def positive_rate(self) -> float:
        return float(self.y.mean()) if len(self) else float("nan")


def _subset_columns(schema, subset):
    sub = schema.subset(subset if subset is not None else schema.names)
    return sub, [schema.index(n) for n in sub.names]


def drop_incomplete(records: Sequence[RawRecord], schema: FeatureSchema = UCI_SCHEMA,
                    subset: Sequence[str] | None = None) -> list[RawRecord]:
    """Records with no missing value among the ``subset`` columns or the label."""
    _, cols = _subset_columns(schema, subset)
    return [r for r in records
            if r.label is not None and all(r.values[j] is not None for j in cols)]


def preprocess(records: Sequence[RawRecord], schema: FeatureSchema = UCI_SCHEMA,
               subset: Sequence[str] | None = None) -> TabularDataset:
    """Drop incomplete rows, binarize ``num`` (> 0 means disease) and keep ``subset``.

    ``subset`` defaults to every feature in ``schema``. Categorical codes are
    kept as numbers.
    """
    sub, cols = _subset_columns(schema, subset)
    kept = drop_incomplete(records, schema, sub.names)
    X = np.array([[r.values[j] for j in cols] for r in kept], dtype=float).reshape(len(kept), len(cols))
    y = np.array([1 if r.label > 0 else 0 for r in kept], dtype=np.int64)
    centers = np.array([r.center for r in kept], dtype=object)
    return TabularDataset(X, y, centers, sub)


def split_train_test(ds: TabularDataset, seed: int,
                     train_frac: float = 0.66) -> tuple[TabularDataset, TabularDataset]:
    """Seeded shuffle followed by a prefix split of ``floor(N * train_frac)`` rows."""
    if not 0.0 < train_frac < 1.0:
        raise SplitError(f"train_frac must lie in (0, 1), got {train_frac}")
    n = len(ds)
    if n < 2:
        raise SplitError(f"cannot split a dataset of {n} rows")
    n_train = math.floor(n * train_frac)
    if n_train == 0 or n_train == n:
        raise SplitError(f"train_frac={train_frac} leaves an empty side for N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.take(perm[:n_train]), ds.take(perm[n_train:])


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    tol: float = ZERO_VARIANCE_TOL

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        degenerate = self.std < self.tol
        scale = np.where(degenerate, 1.0, self.std)
        Z = (X - self.mean) / scale
        Z[..., degenerate] = 0.0
        return Z


def fit_standardization(X: np.ndarray) -> StandardizationStats:
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ContractError("cannot fit standardization on an empty matrix")
    return StandardizationStats(X.mean(axis=0), X.std(axis=0))


def standardize(train: TabularDataset, test: TabularDataset):
    """Z-score both sets with statistics from ``train`` only.

    Columns with (near-)zero training variance map to 0.

    Returns
    -------
    (train_z, test_z, stats)
    """
    if len(train) == 0:
        raise ContractError("training set is empty")
    if train.schema != test.schema:
        raise ContractError("train and test schemas differ")
    stats = fit_standardization(train.X)
    return train.with_features(stats.apply(train.X)), test.with_features(stats.apply(test.X)), stats


def partition_by_center(ds: TabularDataset) -> dict[Center, TabularDataset]:
    """Split ``ds`` by center tag; every center gets an entry, possibly empty."""
    out = {}
    for c in CENTERS:
        idx = np.flatnonzero(np.array([t == c for t in ds.centers], dtype=bool))
        out[c] = ds.take(idx)
    return out


def count_by_center(records: Iterable[RawRecord]) -> dict[Center, int]:
    counts = {c: 0 for c in CENTERS}
    for r in records:
        counts[r.center] += 1
    return counts
