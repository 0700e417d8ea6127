"""Tabular dataset ingestion: CSV parsing, label binarization, splitting and
min-max normalization.

Everything here is a pure function of its inputs plus an explicit seed.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

RULES = ("abalone", "cmc", "texture", "yeast", "identity")


class DataError(ValueError):
    """Raised for malformed input files, configs or datasets."""


@dataclass(frozen=True)
class RawTable:
    column_names: list[str]
    rows: list[list]  # floats, or str for categorical/label cells
    label_column: int

    def __post_init__(self):
        if not 0 <= self.label_column < len(self.column_names):
            raise DataError(f"label column index {self.label_column} out of range")
        width = len(self.column_names)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def label_name(self) -> str:
        return self.column_names[self.label_column]

    @property
    def feature_names(self) -> list[str]:
        return [c for j, c in enumerate(self.column_names) if j != self.label_column]

    def labels(self) -> list:
        return [row[self.label_column] for row in self.rows]

    def features(self) -> np.ndarray:
        idx = [j for j in range(len(self.column_names)) if j != self.label_column]
        X = np.empty((len(self.rows), len(idx)))
        for i, row in enumerate(self.rows):
            for k, j in enumerate(idx):
                v = row[j]
                if isinstance(v, str):
                    raise DataError(
                        f"non-numeric value {v!r} in feature column {self.column_names[j]!r}")
                X[i, k] = v
        return X


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    feature_names: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise DataError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError(f"{self.name}: X contains missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError(f"{self.name}: labels must be 0/1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def positive_label_rate(self) -> float:
        return float(np.mean(self.y)) if self.n else 0.0

    def subset(self, idx) -> "Dataset":
        return replace(self, X=self.X[idx], y=self.y[idx], meta=dict(self.meta))


@dataclass(frozen=True)
class NormParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        if np.any(self.minimum > self.maximum):
            raise DataError("normalizer min exceeds max")

    @property
    def constant_features(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.maximum == self.minimum)]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass
class DatasetConfig:
    """One dataset entry as stored in the JSON config files."""

    name: str
    path: str
    label_column: str
    drop_columns: list[str] = field(default_factory=list)
    binarization_rule: str = "identity"
    row_cap: int | None = None
    balance_classes: bool = False
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "DatasetConfig":
        missing = {"name", "path", "label_column"} - set(d)
        if missing:
            raise DataError(f"dataset config missing keys: {sorted(missing)}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"dataset config has unknown keys: {sorted(unknown)}")
        cfg = cls(**d)
        if base_dir is not None and not Path(cfg.path).is_absolute():
            cfg.path = str((base_dir / cfg.path).resolve())
        if cfg.binarization_rule not in RULES:
            raise DataError(f"unknown binarization rule {cfg.binarization_rule!r}")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "DatasetConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "path": self.path, "label_column": self.label_column,
            "drop_columns": list(self.drop_columns),
            "binarization_rule": self.binarization_rule, "row_cap": self.row_cap,
            "balance_classes": self.balance_classes, "seed": self.seed,
        }


def _parse_cell(text: str):
    text = text.strip()
    if text == "" or text == "?":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def load_csv(path: str | Path, label_column: str,
             drop_columns: Sequence[str] = ()) -> RawTable:
    """Read a comma-delimited file with a header row.

    Rows with missing cells (empty or ``?``) are rejected with an error rather
    than imputed.  Columns named in `drop_columns` are removed before any
    type checks, which is how categorical attributes are excluded.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: no rows") from None
        body = [r for r in reader if any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no rows")
    if label_column not in header:
        raise DataError(f"{path}: unknown label column {label_column!r}")
    for name in drop_columns:
        if name not in header:
            raise DataError(f"{path}: unknown drop column {name!r}")

    keep = [j for j, h in enumerate(header) if h not in set(drop_columns)]
    names = [header[j] for j in keep]
    label_idx = names.index(label_column)
    rows = []
    for lineno, raw in enumerate(body, start=2):
        if len(raw) != len(header):
            raise DataError(f"{path}:{lineno}: ragged row ({len(raw)} cells, expected {len(header)})")
        row = [_parse_cell(raw[j]) for j in keep]
        for k, v in enumerate(row):
            if v is None:
                raise DataError(f"{path}:{lineno}: missing value in column {names[k]!r}")
            if isinstance(v, str) and k != label_idx:
                raise DataError(
                    f"{path}:{lineno}: non-numeric value {v!r} in feature column {names[k]!r}")
        rows.append(row)
    return RawTable(column_names=names, rows=rows, label_column=label_idx)


def _label_key(v) -> str:
    # 7.0 and "7" must compare equal
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v).strip()


_CMC_NAMES = {"1": "No-use", "2": "Long-term", "3": "Short-term"}


def binarize_labels(table: RawTable, rule: str, name: str = "dataset") -> Dataset:
    """Map the label column of `table` to {0, 1} using one of the named rules.

    ``abalone``: Rings < 10 is negative.  ``cmc``: 'No-use' (code 1) is
    negative, the other two methods positive.  ``texture``: keep classes 3
    (negative) and 9 (positive).  ``yeast``: keep classes 0 (negative) and 7
    (positive).  ``identity``: labels must already be 0/1.
    """
    labels = table.labels()
    keep = np.ones(len(labels), dtype=bool)

    if rule == "abalone":
        if any(isinstance(v, str) for v in labels):
            raise DataError("abalone rule needs a numeric Rings column")
        y = np.array([0 if v < 10 else 1 for v in labels])
    elif rule == "cmc":
        keys = [_CMC_NAMES.get(_label_key(v), _label_key(v)) for v in labels]
        if "No-use" not in keys:
            raise DataError("cmc rule: no 'No-use' class present")
        unknown = set(keys) - set(_CMC_NAMES.values())
        if unknown:
            raise DataError(f"cmc rule: unexpected classes {sorted(unknown)}")
        y = np.array([0 if k == "No-use" else 1 for k in keys])
    elif rule in ("texture", "yeast"):
        neg, pos = ("3", "9") if rule == "texture" else ("0", "7")
        keys = [_label_key(v) for v in labels]
        if neg not in keys or pos not in keys:
            raise DataError(f"{rule} rule: classes {neg!r} and {pos!r} must both be present")
        keep = np.array([k in (neg, pos) for k in keys])
        y = np.array([1 if k == pos else 0 for k in keys])
    elif rule == "identity":
        keys = [_label_key(v) for v in labels]
        bad = set(keys) - {"0", "1"}
        if bad:
            raise DataError(f"identity rule: labels must be 0/1, found {sorted(bad)[:5]}")
        y = np.array([int(k) for k in keys])
    else:
        raise DataError(f"unknown binarization rule {rule!r}")

    X = table.features()
    return Dataset(X=X[keep], y=y[keep], name=name, feature_names=tuple(table.feature_names))


def subsample(d: Dataset, cap: int | None, seed: int, balance: bool = False) -> Dataset:
    """Seeded uniform subsample down to at most `cap` rows.

    With ``balance=True`` each class contributes ``cap // 2`` rows (or all of
    its rows when it has fewer).
    """
    if cap is None or cap >= d.n and not balance:
        return d
    rng = np.random.default_rng(seed)
    if balance:
        parts = []
        for c in (0, 1):
            idx = np.flatnonzero(d.y == c)
            take = min(len(idx), cap // 2)
            parts.append(rng.choice(idx, size=take, replace=False))
        idx = np.sort(np.concatenate(parts))
    else:
        idx = np.sort(rng.choice(d.n, size=cap, replace=False))
    return d.subset(idx)


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Unstratified seeded shuffle split.

    The test part gets ``ceil(n * (1 - fraction))`` rows and train the rest
    (the usual convention; reproduces e.g. 1097 train rows from 1372).
    """
    if d.n < 5:
        raise DataError(f"{d.name}: need at least 5 rows to split, got {d.n}")
    n_test = int(math.ceil(d.n * (1.0 - spec.train_fraction) - 1e-9))
    n_train = d.n - n_test
    if n_train >= d.n or n_train == 0:
        raise DataError(f"{d.name}: split of {d.n} rows leaves an empty part")
    perm = np.random.default_rng(spec.seed).permutation(d.n)
    return d.subset(np.sort(perm[:n_train])), d.subset(np.sort(perm[n_train:]))


def fit_normalizer(train: Dataset) -> NormParams:
    if train.n == 0:
        raise DataError("cannot fit normalizer on an empty dataset")
    return NormParams(minimum=train.X.min(axis=0), maximum=train.X.max(axis=0))


def apply_normalizer(params: NormParams, d: Dataset) -> Dataset:
    if d.m != len(params.minimum):
        raise DataError(f"normalizer fitted on {len(params.minimum)} features, got {d.m}")
    span = params.maximum - params.minimum
    const = span == 0
    X = (d.X - params.minimum) / np.where(const, 1.0, span)
    X[:, const] = 0.0
    X = np.clip(X, 0.0, 1.0)
    meta = dict(d.meta)
    if const.any():
        meta["constant_features"] = [int(j) for j in np.flatnonzero(const)]
        log.warning("%s: constant feature(s) %s mapped to 0", d.name, meta["constant_features"])
    return replace(d, X=X, meta=meta)


@dataclass(frozen=True)
class PreparedData:
    train: Dataset
    test: Dataset
    norm: NormParams
    provenance: dict


def prepare(cfg: DatasetConfig, seed: int | None = None,
            train_fraction: float = 0.8) -> PreparedData:
    """Full pipeline: load, binarize, cap, split, then normalize on train only."""
    seed = cfg.seed if seed is None else seed
    table = load_csv(cfg.path, cfg.label_column, cfg.drop_columns)
    full = binarize_labels(table, cfg.binarization_rule, name=cfg.name)
    capped = subsample(full, cfg.row_cap, seed, balance=cfg.balance_classes)
    train, test = split(capped, SplitSpec(train_fraction, seed))
    norm = fit_normalizer(train)
    train, test = apply_normalizer(norm, train), apply_normalizer(norm, test)
    provenance = {
        "name": cfg.name, "source": str(cfg.path), "rule": cfg.binarization_rule,
        "seed": seed, "train_fraction": train_fraction,
        "rows_raw": len(table.rows), "rows_binarized": full.n, "rows_used": capped.n,
        "n_train": train.n, "n_test": test.n, "m": train.m,
        "positive_label_rate_train": train.positive_label_rate,
        "constant_features": norm.constant_features,
    }
    return PreparedData(train, test, norm, provenance)


def flip_budget(n: int, epsilon: float) -> int:
    """Integer flip budget ``floor(n * epsilon)``, guarded against float noise."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return min(n, int(math.floor(n * epsilon + 1e-9)))


def save_dataset_csv(d: Dataset, path: str | Path) -> None:
    """Write features followed by a final ``label`` column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(d.feature_names) or [f"x{j}" for j in range(d.m)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["label"])
        for xi, yi in zip(d.X, d.y):
            w.writerow([repr(float(v)) for v in xi] + [int(yi)])


def load_dataset_csv(path: str | Path, name: str | None = None) -> Dataset:
    path = Path(path)
    table = load_csv(path, "label")
    return binarize_labels(table, "identity", name=name or path.stem)
