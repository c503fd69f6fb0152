"""Tabular benchmark data: descriptors, parsing, target binning, feature
preprocessing and stratified folds.

Datasets are read from local files; each one is described by a JSON
descriptor shipped in ``unimodal_ordinal/datasets``. Nothing here touches
the network.
"""

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_is_fitted

STD_FLOOR = 1e-8
MISSING_TOKENS = frozenset({"", "?", "na", "nan", "NA", "NaN"})


class DatasetNotFoundError(FileNotFoundError):
    """The data file for a known dataset is not in the data directory."""


class DataFormatError(ValueError):
    """A data file does not match its descriptor."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str                       # "numeric", "categorical" or "target"
    categories: tuple = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical", "target"):
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))


@dataclass(frozen=True)
class DatasetDescriptor:
    id: str
    filename: str
    columns: tuple
    url: str = None
    sha256: str = None
    delimiter: str = ","
    target_order: tuple = None
    discretize: dict = None
    n_rows: int = None
    n_classes: int = None
    description: str = ""

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["columns"] = tuple(ColumnSpec(**c) for c in d["columns"])
        if d.get("target_order") is not None:
            d["target_order"] = tuple(str(v) for v in d["target_order"])
        targets = [c for c in d["columns"] if c.kind == "target"]
        if len(targets) != 1:
            raise ValueError(f"descriptor {d.get('id')!r} needs exactly one target column")
        return cls(**d)

    @property
    def feature_columns(self):
        return tuple(c for c in self.columns if c.kind != "target")

    @property
    def target_index(self):
        return next(i for i, c in enumerate(self.columns) if c.kind == "target")


@dataclass(frozen=True)
class TabularDataset:
    """Parsed dataset before feature preprocessing.

    ``raw`` is an ``(N, D)`` object array holding floats for numeric columns
    and strings for categorical ones; ``labels`` are classes ``1..K``.
    """

    raw: np.ndarray
    labels: np.ndarray
    n_classes: int
    schema: tuple
    provenance: str = ""
    sha256: str = None
    bin_edges: np.ndarray = None
    name: str = ""

    @property
    def n_samples(self):
        return self.labels.size

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes + 1)[1:]


@dataclass(frozen=True)
class FoldSplit:
    """Disjoint stratified folds; ``folds[validation_fold]`` is held for tuning."""

    folds: tuple
    seed: int = 0
    validation_fold: int = 0
    warnings: tuple = field(default=())

    @property
    def k(self):
        return len(self.folds)

    def train_test(self, f):
        """Indices ``(train, test)`` with fold ``f`` held out."""
        test = self.folds[f]
        train = np.sort(np.concatenate([self.folds[g] for g in range(self.k) if g != f]))
        return train, test

    @property
    def evaluation_folds(self):
        return [f for f in range(self.k) if f != self.validation_fold]


# ---------------------------------------------------------------- descriptors

def available_datasets():
    root = resources.files("unimodal_ordinal") / "datasets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def get_descriptor(dataset_id):
    root = resources.files("unimodal_ordinal") / "datasets"
    path = root / f"{dataset_id}.json"
    if not path.is_file():
        raise KeyError(f"unknown dataset {dataset_id!r}; known: {', '.join(available_datasets())}")
    return DatasetDescriptor.from_dict(json.loads(path.read_text()))


# -------------------------------------------------------------------- parsing

def _parse_rows(text, descriptor, source):
    columns = descriptor.columns
    rows = []
    reader = csv.reader(io.StringIO(text), delimiter=descriptor.delimiter)
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not tok.strip() for tok in row):
            continue
        row = [tok.strip() for tok in row]
        if len(row) != len(columns):
            raise DataFormatError(
                f"{source}:{lineno}: expected {len(columns)} fields, found {len(row)}")
        parsed = []
        for col, tok in zip(columns, row):
            if tok in MISSING_TOKENS:
                raise DataFormatError(f"{source}:{lineno}: missing value in column {col.name!r}")
            if col.kind == "numeric":
                try:
                    parsed.append(float(tok))
                except ValueError:
                    raise DataFormatError(
                        f"{source}:{lineno}: column {col.name!r} is not numeric: {tok!r}"
                    ) from None
            else:
                if col.categories is not None and tok not in col.categories:
                    raise DataFormatError(
                        f"{source}:{lineno}: unknown category {tok!r} in column {col.name!r}")
                parsed.append(tok)
        rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{source}: no data rows")
    return rows


def load_csv(path, descriptor):
    """Parse ``path`` according to ``descriptor`` (row order is kept)."""
    path = Path(path)
    data = path.read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    if descriptor.sha256 and descriptor.sha256 != digest:
        raise DataFormatError(f"{path}: sha256 {digest} does not match {descriptor.sha256}")
    rows = _parse_rows(data.decode("utf-8"), descriptor, str(path))
    t = descriptor.target_index
    feats = [c for i, c in enumerate(descriptor.columns) if i != t]
    raw = np.empty((len(rows), len(feats)), dtype=object)
    for r, row in enumerate(rows):
        raw[r] = [v for i, v in enumerate(row) if i != t]
    target = [row[t] for row in rows]
    edges = None
    if descriptor.target_order is not None:
        order = {v: i + 1 for i, v in enumerate(descriptor.target_order)}
        unknown = sorted(set(target) - set(order))
        if unknown:
            raise DataFormatError(f"{path}: unknown target values {unknown}")
        labels = np.array([order[v] for v in target], dtype=np.int64)
        K = len(order)
    elif descriptor.discretize:
        try:
            values = np.array([float(v) for v in target])
        except ValueError:
            raise DataFormatError(f"{path}: target column must be numeric to discretize") from None
        K = int(descriptor.discretize["n_classes"])
        labels, edges = discretize_target(values, K, descriptor.discretize.get("strategy",
                                                                             "equal_frequency"))
    else:
        raise DataFormatError(f"descriptor {descriptor.id!r} gives no target mapping")
    counts = np.bincount(labels, minlength=K + 1)[1:]
    if np.any(counts == 0):
        raise DataFormatError(f"{path}: classes {list(np.nonzero(counts == 0)[0] + 1)} are empty")
    return TabularDataset(raw=raw, labels=labels, n_classes=K, schema=tuple(feats),
                          provenance=f"{path.resolve()} ({descriptor.url or 'local'})",
                          sha256=digest, bin_edges=edges, name=descriptor.id)


def load_dataset(dataset_id, data_dir="data"):
    """Load a registered dataset from ``data_dir``."""
    descriptor = get_descriptor(dataset_id)
    path = Path(data_dir) / descriptor.filename
    if not path.is_file():
        hint = ("run `unimodal-ordinal data generate balance-scale`"
                if dataset_id == "balance-scale" else "run scripts/fetch_datasets.py")
        raise DatasetNotFoundError(
            f"{dataset_id}: {path} not found. Download {descriptor.url} into {data_dir} "
            f"or {hint}.")
    return load_csv(path, descriptor)


# ------------------------------------------------------------------- binning

def discretize_target(raw, K, strategy="equal_frequency"):
    """Bin a numeric target into ordered classes ``1..K``.

    Returns ``(labels, edges)`` with ``K + 1`` edges. ``equal_width`` splits
    ``[min, max]`` into equal intervals (the maximum joins the last bin);
    ``equal_frequency`` uses empirical quantiles, so tied values can leave a
    bin empty, which is reported as an error.
    """
    x = np.asarray(raw, dtype=np.float64).ravel()
    if int(K) != K or K < 2:
        raise ValueError(f"need K >= 2 classes, got {K!r}")
    K = int(K)
    if not np.all(np.isfinite(x)):
        raise ValueError("target contains non-finite values")
    if np.unique(x).size < K:
        raise ValueError(f"only {np.unique(x).size} distinct target values for {K} classes")
    if strategy == "equal_width":
        lo, hi = x.min(), x.max()
        edges = np.linspace(lo, hi, K + 1)
        labels = np.clip(np.floor(K * (x - lo) / (hi - lo)).astype(np.int64), 0, K - 1) + 1
    elif strategy == "equal_frequency":
        edges = np.quantile(x, np.linspace(0.0, 1.0, K + 1))
        labels = np.searchsorted(edges[1:-1], x, side="right") + 1
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    counts = np.bincount(labels, minlength=K + 1)[1:]
    if np.any(counts == 0):
        raise ValueError(f"{strategy} binning leaves classes {list(np.nonzero(counts == 0)[0] + 1)}"
                         " empty")
    return labels, edges


# ------------------------------------------------------------- preprocessing

class TabularPreprocessor(TransformerMixin, BaseEstimator):
    """Z-score numeric columns and one-hot encode categorical ones.

    ``schema`` is a sequence of :class:`ColumnSpec` for the feature columns.
    Category lists come from the schema when given, otherwise from the
    training rows; an unseen category at transform time is an error.
    """

    def __init__(self, schema=None):
        self.schema = schema

    def fit(self, X, y=None):
        X = self._check(X)
        self.means_, self.scales_, self.categories_ = {}, {}, {}
        for j, col in enumerate(self.schema):
            if col.kind == "numeric":
                v = X[:, j].astype(np.float64)
                self.means_[j] = v.mean()
                self.scales_[j] = max(v.std(), STD_FLOOR)
            else:
                cats = col.categories or tuple(sorted(set(X[:, j])))
                self.categories_[j] = tuple(cats)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = self._check(X)
        blocks = []
        for j, col in enumerate(self.schema):
            if col.kind == "numeric":
                v = X[:, j].astype(np.float64)
                blocks.append(((v - self.means_[j]) / self.scales_[j])[:, None])
            else:
                cats = self.categories_[j]
                index = {c: i for i, c in enumerate(cats)}
                unknown = sorted(set(X[:, j]) - set(index))
                if unknown:
                    raise ValueError(f"column {col.name!r}: unknown categories {unknown}")
                onehot = np.zeros((X.shape[0], len(cats)))
                onehot[np.arange(X.shape[0]), [index[v] for v in X[:, j]]] = 1.0
                blocks.append(onehot)
        return np.hstack(blocks)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "means_")
        names = []
        for j, col in enumerate(self.schema):
            if col.kind == "numeric":
                names.append(col.name)
            else:
                names.extend(f"{col.name}={c}" for c in self.categories_[j])
        return np.array(names, dtype=object)

    def _check(self, X):
        if self.schema is None:
            raise ValueError("TabularPreprocessor needs a schema")
        X = np.asarray(X, dtype=object)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise ValueError(f"expected {len(self.schema)} columns, got shape {X.shape}")
        return X


def fit_transform_features(dataset, train_idx, apply_idx):
    """Fit the preprocessor on ``train_idx`` rows; return it and both matrices."""
    prep = TabularPreprocessor(dataset.schema).fit(dataset.raw[train_idx])
    return prep, prep.transform(dataset.raw[train_idx]), prep.transform(dataset.raw[apply_idx])


# --------------------------------------------------------------------- folds

def stratified_kfold(labels, k=5, seed=0):
    """Shuffled stratified ``k``-fold split; per-class fold sizes differ by at most one."""
    labels = np.asarray(labels)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
        folds = tuple(np.sort(test) for _, test in splitter.split(np.zeros(labels.size), labels))
    messages = tuple(str(w.message) for w in caught)
    for msg in messages:
        warnings.warn(msg, UserWarning, stacklevel=2)
    return FoldSplit(folds=folds, seed=seed, warnings=messages)


# ----------------------------------------------------------- audit sidecars

def write_sidecars(dataset, split, directory):
    """Write bin edges and fold indices as plain text; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    if dataset.bin_edges is not None:
        p = directory / f"{dataset.name}.bin_edges.txt"
        p.write_text("\n".join(repr(float(e)) for e in dataset.bin_edges) + "\n")
        paths.append(p)
    p = directory / f"{dataset.name}.folds.seed{split.seed}.txt"
    lines = [f"# fold {f + 1}: " + ("validation" if f == split.validation_fold else "evaluation")
             + "\n" + " ".join(str(int(i)) for i in fold) for f, fold in enumerate(split.folds)]
    p.write_text("\n".join(lines) + "\n")
    paths.append(p)
    return paths


# ------------------------------------------------------------ balance scale

def balance_scale_rows():
    """All 625 balance-scale records, in the canonical file order.

    The scale tips towards the side with the larger weight times distance.
    """
    rows = []
    for lw in range(1, 6):
        for ld in range(1, 6):
            for rw in range(1, 6):
                for rd in range(1, 6):
                    left, right = lw * ld, rw * rd
                    cls = "L" if left > right else "R" if left < right else "B"
                    rows.append(f"{cls},{lw},{ld},{rw},{rd}")
    return rows


def write_balance_scale(data_dir="data"):
    path = Path(data_dir) / get_descriptor("balance-scale").filename
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(balance_scale_rows()) + "\n")
    return path
