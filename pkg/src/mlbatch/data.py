"""Multi-label dataset containers, MULAN/ARFF and CSV readers, fold splits."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Base class for every dataset loading / validation failure."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingLabelError(DataError):
    pass


class LabelValueError(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        Y = np.array(self.labels)
        if X.ndim != 2 or Y.ndim != 2:
            raise DataError("features and labels must be 2-d")
        n, d = X.shape
        if n < 1 or d < 1 or Y.shape[1] < 1:
            raise DataError(f"need n, d, q >= 1, got features {X.shape} labels {Y.shape}")
        if Y.shape[0] != n:
            raise DataError(f"row mismatch: {n} feature rows vs {Y.shape[0]} label rows")
        if not np.isin(Y, (0, 1)).all():
            raise LabelValueError("label entries must be exactly 0 or 1")
        Y = Y.astype(np.int8)
        fnames = list(self.feature_names) or [f"x{i}" for i in range(d)]
        lnames = list(self.label_names) or [f"y{j}" for j in range(Y.shape[1])]
        if len(fnames) != d or len(lnames) != Y.shape[1]:
            raise DataError("name lists do not match matrix widths")
        if len(set(lnames)) != len(lnames):
            raise DataError("duplicate label names")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", Y)
        object.__setattr__(self, "feature_names", fnames)
        object.__setattr__(self, "label_names", lnames)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def q(self) -> int:
        return self.labels.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx],
                       self.feature_names, self.label_names)


@dataclass(frozen=True)
class DatasetStats:
    card: float
    dens: float


@dataclass(frozen=True)
class FoldSplit:
    fold_count: int
    assignments: np.ndarray

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.fold_count)

    def train_val_test(self, fold: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fold ``fold`` is the test part, the next fold (cyclically) validation,
        the remaining folds training."""
        val_fold = (fold + 1) % self.fold_count
        test = self.indices(fold)
        val = self.indices(val_fold)
        train = np.flatnonzero((self.assignments != fold) & (self.assignments != val_fold))
        return train, val, test


def stats(dataset: Dataset) -> DatasetStats:
    card = float(dataset.labels.sum(dtype=np.int64)) / dataset.n
    return DatasetStats(card=card, dens=card / dataset.q)


def kfold(dataset_or_n, fold_count: int, seed: int) -> FoldSplit:
    n = dataset_or_n if isinstance(dataset_or_n, int) else dataset_or_n.n
    if fold_count < 2:
        raise ValueError(f"fold_count must be >= 2, got {fold_count}")
    if fold_count > n:
        raise ValueError(f"fold_count {fold_count} exceeds number of instances {n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % fold_count
    return FoldSplit(fold_count, assignments)


# --- CSV -------------------------------------------------------------------

def load_csv(csv_path, label_count: int) -> Dataset:
    path = Path(csv_path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    width = len(header)
    if not 1 <= label_count < width:
        raise DataError(f"label_count {label_count} incompatible with {width} columns")
    if not body:
        raise ParseError(f"{path}: no data rows", line=2)
    values = np.empty((len(body), width), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", line=i + 2)
        try:
            values[i] = [float(v) for v in row]
        except ValueError as exc:
            raise ParseError(str(exc), line=i + 2) from None
    split = width - label_count
    labels = values[:, split:]
    if not np.isin(labels, (0.0, 1.0)).all():
        raise LabelValueError(f"{path}: label columns must contain only 0/1")
    return Dataset(values[:, :split], labels.astype(np.int8),
                   [h.strip() for h in header[:split]],
                   [h.strip() for h in header[split:]])


def write_csv(dataset: Dataset, csv_path) -> None:
    with Path(csv_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + dataset.label_names)
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [str(int(v)) for v in y])


# --- ARFF ------------------------------------------------------------------

_NUMERIC_TYPES = {"numeric", "real", "integer"}
_ATTR_RE = re.compile(r"""@attribute\s+('(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*"|\S+)\s+(.+)$""",
                      re.IGNORECASE)
_XML_LABEL_RE = re.compile(r"""<label\s+name\s*=\s*(["'])(.*?)\1""", re.IGNORECASE)


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1].replace("\\'", "'").replace('\\"', '"')
    return token


@dataclass
class _Attribute:
    name: str
    nominal: list[str] | None  # None for numeric


def _parse_attribute(line: str, lineno: int) -> _Attribute:
    m = _ATTR_RE.match(line)
    if m is None:
        raise ParseError(f"malformed attribute declaration: {line!r}", lineno)
    name, kind = _unquote(m.group(1)), m.group(2).strip()
    if kind.startswith("{"):
        if not kind.endswith("}"):
            raise ParseError(f"unterminated nominal set for {name!r}", lineno)
        values = [_unquote(v) for v in kind[1:-1].split(",") if v.strip()]
        return _Attribute(name, values)
    if kind.lower() in _NUMERIC_TYPES:
        return _Attribute(name, None)
    raise ParseError(f"unsupported attribute type {kind!r} for {name!r}", lineno)


def read_label_list(path) -> list[str]:
    """Label names from a MULAN XML file or a plain one-name-per-line list."""
    text = Path(path).read_text()
    if "<label" in text.lower():
        return [_unquote(m.group(2)) for m in _XML_LABEL_RE.finditer(text)]
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def _split_data_row(line: str) -> list[str]:
    return next(csv.reader([line], skipinitialspace=True, quotechar="'"))


def load_arff(arff_path, label_spec) -> Dataset:
    """Read a dense or sparse ARFF file.

    ``label_spec`` is either a path to a label list (MULAN XML or plain text)
    or an integer count of trailing label attributes.
    """
    path = Path(arff_path)
    attrs: list[_Attribute] = []
    rows: list[tuple[int, str]] = []
    in_data = False
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                rows.append((lineno, line))
                continue
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                attrs.append(_parse_attribute(line, lineno))
            elif low.startswith("@data"):
                in_data = True
            else:
                raise ParseError(f"unexpected header line {line!r}", lineno)
    if not in_data:
        raise ParseError(f"{path}: no @data section")
    if not attrs:
        raise ParseError(f"{path}: no attributes declared")

    names = [a.name for a in attrs]
    if isinstance(label_spec, (int, np.integer)):
        if not 1 <= label_spec < len(attrs):
            raise DataError(f"trailing label count {label_spec} out of range")
        label_names = names[len(names) - int(label_spec):]
    else:
        label_names = read_label_list(label_spec)
    position = {name: i for i, name in enumerate(names)}
    missing = [name for name in label_names if name not in position]
    if missing:
        raise MissingLabelError(f"label attributes not found in {path.name}: {missing[:5]}")
    if len(set(label_names)) != len(label_names):
        raise DataError("label list names a label more than once")
    label_cols = [position[name] for name in label_names]
    label_set = set(label_cols)
    feature_cols = [i for i in range(len(attrs)) if i not in label_set]
    if not feature_cols:
        raise DataError("no feature attributes remain after removing labels")

    # nominal values must be numeric strings; labels restricted further below
    lookup: list[dict[str, float] | None] = []
    for a in attrs:
        if a.nominal is None:
            lookup.append(None)
            continue
        try:
            lookup.append({v: float(v) for v in a.nominal})
        except ValueError:
            raise DataError(f"nominal attribute {a.name!r} has non-numeric values") from None

    values = np.zeros((len(rows), len(attrs)), dtype=np.float64)
    for r, (lineno, line) in enumerate(rows):
        if line.startswith("{"):
            if not line.endswith("}"):
                raise ParseError("unterminated sparse instance", lineno)
            body = line[1:-1].strip()
            entries = [e for e in body.split(",") if e.strip()] if body else []
            for entry in entries:
                parts = entry.split(None, 1)
                if len(parts) != 2:
                    raise ParseError(f"bad sparse entry {entry!r}", lineno)
                try:
                    col = int(parts[0])
                except ValueError:
                    raise ParseError(f"bad sparse index {parts[0]!r}", lineno) from None
                if not 0 <= col < len(attrs):
                    raise ParseError(f"sparse index {col} out of range", lineno)
                values[r, col] = _convert(parts[1], lookup[col], attrs[col].name, lineno)
        else:
            fields = _split_data_row(line)
            if len(fields) != len(attrs):
                raise ParseError(f"expected {len(attrs)} values, got {len(fields)}", lineno)
            for c, tok in enumerate(fields):
                values[r, c] = _convert(tok, lookup[c], attrs[c].name, lineno)

    labels = values[:, label_cols]
    if not np.isin(labels, (0.0, 1.0)).all():
        bad = np.argwhere(~np.isin(labels, (0.0, 1.0)))[0]
        raise LabelValueError(f"non-binary value {labels[tuple(bad)]!r} for label "
                              f"{label_names[bad[1]]!r} (data row {bad[0] + 1})")
    return Dataset(values[:, feature_cols], labels.astype(np.int8),
                   [names[i] for i in feature_cols], label_names)


def _convert(token: str, lookup, name: str, lineno: int) -> float:
    token = _unquote(token)
    if token == "?":
        raise DataError(f"line {lineno}: missing value for {name!r} (imputation unsupported)")
    if lookup is not None:
        if token not in lookup:
            raise ParseError(f"value {token!r} not declared for {name!r}", lineno)
        return lookup[token]
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r} for {name!r}", lineno) from None
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: non-finite value for {name!r}")
    return value


def load(path, fmt: str | None = None, labels=None) -> Dataset:
    """Dispatch on format; ``labels`` is a label-list path or trailing count."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if isinstance(labels, str) and labels.isdigit():
        labels = int(labels)
    if fmt == "arff":
        if labels is None:
            raise DataError("ARFF input needs a label list or trailing label count")
        return load_arff(path, labels)
    if fmt == "csv":
        if not isinstance(labels, (int, np.integer)):
            raise DataError("CSV input needs an integer label count")
        return load_csv(path, int(labels))
    raise DataError(f"unknown dataset format {fmt!r}")


# --- synthetic data ----------------------------------------------------------

def make_synthetic(n: int = 2000, d: int = 20, q: int = 10, rare_labels: int = 2,
                   rare_rate: float = 0.02, noise: float = 0.5, seed: int = 0,
                   common_rates=None) -> Dataset:
    """Linear-score multi-label data with a controlled positive rate per label.

    Label j is on when ``x @ W[:, j] + noise * N(0, 1)`` exceeds the quantile
    that yields its target positive rate. The first ``rare_labels`` labels get
    ``rare_rate``; the rest spread over ``common_rates`` (default 0.1..0.4).
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    W = rng.standard_normal((d, q)) / math.sqrt(d)
    scores = X @ W + noise * rng.standard_normal((n, q))
    if common_rates is None:
        common_rates = np.linspace(0.1, 0.4, q - rare_labels) if q > rare_labels else []
    rates = np.concatenate([np.full(rare_labels, rare_rate), np.asarray(common_rates, float)])
    Y = np.zeros((n, q), dtype=np.int8)
    for j in range(q):
        positives = max(1, int(round(rates[j] * n)))
        top = np.argsort(-scores[:, j], kind="stable")[:positives]
        Y[top, j] = 1
    return Dataset(X, Y)
