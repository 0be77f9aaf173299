"""Fold-level performance tables: parsing, validation and pairwise differences."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "DataError",
    "FoldId",
    "PerfTable",
    "CvGeometry",
    "PairDifferences",
    "ColumnMap",
    "parse_results_csv",
    "write_results_csv",
    "pair_differences",
    "dataset_means",
]

DATASET_JOIN = "::"
BOUNDED_METRICS = {"auc", "accuracy", "f1", "precision", "recall"}

_FOLD_RE = re.compile(r"^\s*Fold(\d+)\.Rep(\d+)\s*$")


class DataError(ValueError):
    """Raised when performance data is malformed or incomplete.

    ``problems`` holds one human-readable line per detected issue so callers
    (the ``validate`` subcommand in particular) can itemize them.
    """

    def __init__(self, message: str, problems: Sequence[str] = ()):
        self.problems = list(problems) or [message]
        super().__init__(message)


@dataclass(frozen=True, order=True)
class FoldId:
    fold_index: int
    rep_index: int

    def __post_init__(self):
        if self.fold_index < 1 or self.rep_index < 1:
            raise DataError(f"fold and rep indices must be >= 1, got {self.fold_index}, {self.rep_index}")

    @classmethod
    def parse(cls, text: str) -> "FoldId":
        m = _FOLD_RE.match(text)
        if m is None:
            raise DataError(f"malformed resample label {text!r}; expected 'Fold<i>.Rep<j>'")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"Fold{self.fold_index}.Rep{self.rep_index}"


@dataclass(frozen=True)
class CvGeometry:
    """Train/test sizes of a single cross-validation fold (counts or fractions)."""

    n_train: float
    n_test: float

    def __post_init__(self):
        if not (self.n_train > 0 and self.n_test > 0):
            raise ValueError("n_train and n_test must be positive")

    @classmethod
    def k_fold(cls, n_folds: int, n_instances: float = 1.0) -> "CvGeometry":
        test = n_instances / n_folds
        return cls(n_train=n_instances - test, n_test=test)


@dataclass(frozen=True)
class ColumnMap:
    value: str = "value"
    resample: str = "resample"
    dataset: tuple[str, ...] = ("dataset",)
    model: str = "model"

    @classmethod
    def from_spec(cls, spec: str) -> "ColumnMap":
        """Build from ``value,resample,dataset,model``; the dataset slot may
        hold several columns joined by ``+`` (e.g. ``course+session``)."""
        parts = [p.strip() for p in spec.split(",")]
        if len(parts) != 4 or not all(parts):
            raise ValueError(f"column spec needs four names, got {spec!r}")
        return cls(parts[0], parts[1], tuple(parts[2].split("+")), parts[3])


@dataclass(frozen=True, eq=False)
class PerfTable:
    datasets: tuple[str, ...]
    models: tuple[str, ...]
    folds: tuple[FoldId, ...]
    values: np.ndarray  # (N, k, r)
    metric_name: str = "AUC"
    higher_is_better: bool = True
    bounded: bool | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "folds", tuple(self.folds))
        if self.bounded is None:
            object.__setattr__(self, "bounded", self.metric_name.lower() in BOUNDED_METRICS)
        n, k, r = len(self.datasets), len(self.models), len(self.folds)
        if vals.shape != (n, k, r):
            raise DataError(f"values shape {vals.shape} does not match ({n}, {k}, {r})")
        if n < 1 or k < 2 or r < 2:
            raise DataError(f"need at least 1 dataset, 2 models and 2 folds; got N={n}, k={k}, r={r}")
        for label, items in (("dataset", self.datasets), ("model", self.models), ("fold", self.folds)):
            if len(set(items)) != len(items):
                raise DataError(f"duplicate {label} identifiers")
        if not np.all(np.isfinite(vals)):
            raise DataError("table contains non-finite values")
        if self.bounded and (vals.min() < 0.0 or vals.max() > 1.0):
            bad = np.argwhere((vals < 0.0) | (vals > 1.0))
            problems = [
                f"value {vals[tuple(ix)]!r} outside [0, 1] at ({self.datasets[ix[0]]}, {self.models[ix[1]]}, {self.folds[ix[2]]})"
                for ix in bad[:20]
            ]
            raise DataError(f"{len(bad)} value(s) outside [0, 1] for bounded metric {self.metric_name}", problems)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_datasets(self) -> int:
        return len(self.datasets)

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def n_folds(self) -> int:
        return len(self.folds)

    def model_index(self, model: str) -> int:
        try:
            return self.models.index(model)
        except ValueError:
            raise KeyError(f"unknown model {model!r}") from None

    def __eq__(self, other):
        if not isinstance(other, PerfTable):
            return NotImplemented
        return (
            self.datasets == other.datasets
            and self.models == other.models
            and self.folds == other.folds
            and self.metric_name == other.metric_name
            and self.higher_is_better == other.higher_is_better
            and self.bounded == other.bounded
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class PairDifferences:
    model_x: str
    model_y: str
    per_dataset: np.ndarray  # (N, r), positive means x better
    datasets: tuple[str, ...] = field(default=())

    @property
    def n_datasets(self) -> int:
        return self.per_dataset.shape[0]

    @property
    def n_folds(self) -> int:
        return self.per_dataset.shape[1]

    def negated(self) -> "PairDifferences":
        return PairDifferences(self.model_y, self.model_x, -self.per_dataset, self.datasets)


def _read_rows(stream: TextIO | str):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise DataError("input is empty; a header row is required")
    return reader.fieldnames, list(reader)


def parse_results_csv(
    stream: TextIO | str,
    mapping: ColumnMap | None = None,
    metric_name: str = "AUC",
    higher_is_better: bool = True,
    bounded: bool | None = None,
) -> PerfTable:
    """Parse long-format fold results into a validated :class:`PerfTable`.

    Each row carries one metric value for a (dataset, model, resample) cell.
    Row order is irrelevant; dataset, model and fold orderings follow first
    appearance. Every problem found is collected before raising so the error
    lists all of them (missing cells in particular).
    """
    mapping = mapping or ColumnMap()
    header, rows = _read_rows(stream)
    needed = [mapping.value, mapping.resample, *mapping.dataset, mapping.model]
    missing_cols = [c for c in needed if c not in header]
    if missing_cols:
        raise DataError(f"missing column(s): {', '.join(missing_cols)}")

    datasets: dict[str, int] = {}
    models: dict[str, int] = {}
    folds: dict[FoldId, int] = {}
    cells: dict[tuple[int, int, int], float] = {}
    problems: list[str] = []

    for lineno, row in enumerate(rows, start=2):
        raw = (row[mapping.value] or "").strip()
        try:
            value = float(raw)
        except ValueError:
            problems.append(f"line {lineno}: non-numeric value {raw!r}")
            continue
        if not math.isfinite(value):
            problems.append(f"line {lineno}: non-finite value {raw!r}")
            continue
        try:
            fold = FoldId.parse(row[mapping.resample] or "")
        except DataError as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        ds = DATASET_JOIN.join((row[c] or "").strip() for c in mapping.dataset)
        model = (row[mapping.model] or "").strip()
        key = (
            datasets.setdefault(ds, len(datasets)),
            models.setdefault(model, len(models)),
            folds.setdefault(fold, len(folds)),
        )
        if key in cells:
            problems.append(f"line {lineno}: duplicate cell (dataset={ds!r}, model={model!r}, {fold})")
            continue
        cells[key] = value

    ds_names, model_names, fold_ids = list(datasets), list(models), list(folds)
    values = np.full((len(ds_names), len(model_names), len(fold_ids)), np.nan)
    for (i, j, f), v in cells.items():
        values[i, j, f] = v
    for i, j, f in np.argwhere(np.isnan(values)):
        problems.append(f"missing cell (dataset={ds_names[i]!r}, model={model_names[j]!r}, {fold_ids[f]})")

    if problems:
        raise DataError(f"{len(problems)} problem(s) in results table", problems)
    return PerfTable(
        datasets=tuple(ds_names),
        models=tuple(model_names),
        folds=tuple(fold_ids),
        values=values,
        metric_name=metric_name,
        higher_is_better=higher_is_better,
        bounded=bounded,
    )


def write_results_csv(table: PerfTable, stream: TextIO | None = None) -> str:
    """Serialize ``table`` in the canonical long format; returns the text.

    Floats are written with ``repr`` so a reparse is bit-exact.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["value", "resample", "dataset", "model"])
    for i, ds in enumerate(table.datasets):
        for j, model in enumerate(table.models):
            for f, fold in enumerate(table.folds):
                writer.writerow([repr(float(table.values[i, j, f])), str(fold), ds, model])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def pair_differences(table: PerfTable, x: str, y: str) -> PairDifferences:
    """Fold-level differences ``x - y`` per dataset, signed so positive favours x."""
    if x == y:
        raise ValueError(f"pair_differences needs two distinct models, got {x!r} twice")
    ix, iy = table.model_index(x), table.model_index(y)
    diffs = table.values[:, ix, :] - table.values[:, iy, :]
    if not table.higher_is_better:
        diffs = -diffs
    return PairDifferences(x, y, diffs, table.datasets)


def dataset_means(table: PerfTable) -> np.ndarray:
    """(N, k) matrix of fold-averaged scores."""
    return table.values.mean(axis=2)


def table_from_arrays(
    values: np.ndarray,
    datasets: Iterable[str] | None = None,
    models: Iterable[str] | None = None,
    **kwargs,
) -> PerfTable:
    """Convenience constructor with generated labels and ``FoldN.Rep1`` folds."""
    values = np.asarray(values, dtype=float)
    n, k, r = values.shape
    datasets = tuple(datasets) if datasets is not None else tuple(f"d{i + 1}" for i in range(n))
    models = tuple(models) if models is not None else tuple(f"m{j + 1}" for j in range(k))
    folds = tuple(FoldId(f + 1, 1) for f in range(r))
    return PerfTable(datasets, models, folds, values, **kwargs)
