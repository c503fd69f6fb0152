"""Experiment orchestration: training runs, metrics, lambda validation and
sweeps, and result tables.

Protocol: a shuffled stratified 5-fold split per dataset. Fold 1 is used
only to pick ``lam`` for the penalised methods; folds 2-5 are each held out
in turn (training on the other four folds) and their metrics are reported
as mean and standard deviation. Each fold result is first averaged over the
configured seeds.
"""

import csv
import hashlib
import json
import threading
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata
from sklearn.dummy import DummyClassifier

from . import __version__
from .data import fit_transform_features, load_dataset, stratified_kfold
from .estimator import UnimodalOrdinalClassifier
from .methods import METHOD_NAMES, PENALISED
from .simplex import is_unimodal_batch

LAMBDA_GRID = tuple(10.0 ** e for e in range(-3, 4))
TABULAR_SUITE = ("abalone10", "balance-scale", "car", "new-thyroid")
ALL_METHODS = ("dummy",) + METHOD_NAMES


@dataclass(frozen=True)
class ExperimentConfig:
    """One method on one dataset. ``lam=None`` means "validate on fold 1"."""

    dataset: str
    loss: str = "ce"
    lam: float = None
    delta: float = 0.05
    r: float = 1.0
    alpha: float = 1.0
    tau: float = None
    nonneg: str = "relu"
    hidden: int = 128
    epochs: int = 1000
    lr: float = 1e-4
    batch_size: object = 32
    seeds: tuple = (0, 1, 2, 3, 4)
    split_seed: int = 0
    n_folds: int = 5
    lambdas: tuple = LAMBDA_GRID
    max_seconds: float = 600.0
    data_dir: str = "data"

    def __post_init__(self):
        if self.loss not in ALL_METHODS:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {', '.join(ALL_METHODS)}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if not self.seeds:
            raise ValueError("need at least one seed")

    @property
    def penalised(self):
        return self.loss in PENALISED

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["lambdas"] = list(self.lambdas)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy (%), MAE (class-index units) and %unimodality.

    Holds the mean over ``per_fold`` entries and their standard deviations.
    """

    accuracy: float
    mae: float
    unimodality: float
    accuracy_std: float = 0.0
    mae_std: float = 0.0
    unimodality_std: float = 0.0
    per_fold: tuple = field(default=())

    def __post_init__(self):
        if not (0 <= self.accuracy <= 100 and 0 <= self.unimodality <= 100 and self.mae >= 0):
            raise ValueError(f"metrics out of range: {self}")

    @classmethod
    def aggregate(cls, reports):
        reports = list(reports)
        if not reports:
            raise ValueError("nothing to aggregate")
        arr = np.array([[r.accuracy, r.mae, r.unimodality] for r in reports])
        mean, std = arr.mean(axis=0), arr.std(axis=0)
        return cls(float(mean[0]), float(mean[1]), float(mean[2]),
                   float(std[0]), float(std[1]), float(std[2]),
                   tuple((r.accuracy, r.mae, r.unimodality) for r in reports))

    def to_dict(self):
        d = asdict(self)
        d["per_fold"] = [list(t) for t in self.per_fold]
        return d


# ---------------------------------------------------------------- training

def make_model(config, seed, n_classes, lam=None):
    if config.loss == "dummy":
        return DummyClassifier(strategy="most_frequent")
    lam = config.lam if lam is None else lam
    return UnimodalOrdinalClassifier(
        loss=config.loss, lam=1.0 if lam is None else lam, delta=config.delta, r=config.r,
        alpha=config.alpha, tau=config.tau, nonneg=config.nonneg, hidden=config.hidden,
        epochs=config.epochs, lr=config.lr, batch_size=config.batch_size, random_state=seed,
        max_seconds=config.max_seconds, n_classes=n_classes)


def fold_arrays(dataset, split, fold):
    train, test = split.train_test(fold)
    _, X_train, X_test = fit_transform_features(dataset, train, test)
    return X_train, dataset.labels[train], X_test, dataset.labels[test]


def train(config, dataset, split, fold, seed=0, lam=None):
    """Fit one model with ``fold`` held out; returns ``(model, loss_history)``."""
    X_train, y_train, _, _ = fold_arrays(dataset, split, fold)
    model = make_model(config, seed, dataset.n_classes, lam).fit(X_train, y_train)
    return model, getattr(model, "loss_history_", np.array([]))


def evaluate(model, X, y):
    """Metrics of a fitted model on held-out rows (labels ``1..K``)."""
    y = np.asarray(y)
    pred = np.asarray(model.predict(X))
    proba = np.asarray(model.predict_proba(X), dtype=np.float64)
    if isinstance(model, DummyClassifier):
        # one-hot rows over the classes seen in training; pad to all classes
        full = np.zeros((proba.shape[0], int(max(y.max(), model.classes_.max()))))
        full[:, np.asarray(model.classes_) - 1] = proba
        proba = full
    return MetricsReport(accuracy=100.0 * float(np.mean(pred == y)),
                         mae=float(np.mean(np.abs(pred - y))),
                         unimodality=100.0 * float(np.mean(is_unimodal_batch(proba))))


def run_fold(config, dataset, split, fold, lam=None):
    """Seed-averaged metrics with ``fold`` held out."""
    X_train, y_train, X_test, y_test = fold_arrays(dataset, split, fold)
    reports = []
    for seed in config.seeds:
        model = make_model(config, seed, dataset.n_classes, lam).fit(X_train, y_train)
        reports.append(evaluate(model, X_test, y_test))
    return MetricsReport.aggregate(reports)


def _better(a, b):
    """Order for lambda selection: higher accuracy, then lower MAE."""
    return (a.accuracy, -a.mae) > (b.accuracy, -b.mae)


def validate_lambda(config, dataset, split, grid=None):
    """Pick ``lam`` on the validation fold; ties go to the smaller value.

    Returns ``(best_lam, {lam: report})``.
    """
    grid = tuple(grid or config.lambdas)
    scores = {lam: run_fold(config, dataset, split, split.validation_fold, lam) for lam in grid}
    best = grid[0]
    for lam in grid[1:]:
        if _better(scores[lam], scores[best]):
            best = lam
    return best, scores


@dataclass
class ResultRow:
    dataset: str
    method: str
    report: MetricsReport = None
    lam: float = None
    error: str = None
    seconds: float = 0.0
    config: dict = field(default_factory=dict)


def run_config(config, dataset=None, split=None):
    """Validate ``lam`` if needed, then evaluate on the evaluation folds."""
    started = time.perf_counter()
    if dataset is None:
        dataset = load_dataset(config.dataset, config.data_dir)
    if split is None:
        split = stratified_kfold(dataset.labels, config.n_folds, config.split_seed)
    lam = config.lam
    if config.penalised and lam is None:
        lam, _ = validate_lambda(config, dataset, split)
    reports = [run_fold(config, dataset, split, f, lam) for f in split.evaluation_folds]
    return ResultRow(config.dataset, config.loss, MetricsReport.aggregate(reports),
                     lam if config.penalised else None,
                     seconds=time.perf_counter() - started, config=config.to_dict())


# ------------------------------------------------------------------ records

_RECORD_LOCK = threading.Lock()
RECORD_FIELDS = ("time", "hash", "dataset", "method", "lam", "status", "config", "metrics")


def content_hash(config_dict, dataset_sha=None):
    payload = json.dumps({"config": config_dict, "data": dataset_sha, "version": __version__},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def append_record(path, row, dataset_sha=None):
    """Append one run record (tab separated) to ``path``; never rewrites."""
    path = Path(path)
    with _RECORD_LOCK:
        new = not path.exists()
        with path.open("a", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            if new:
                writer.writerow(RECORD_FIELDS)
            writer.writerow([
                time.strftime("%Y-%m-%dT%H:%M:%S"),
                content_hash(row.config, dataset_sha),
                row.dataset, row.method,
                "" if row.lam is None else repr(row.lam),
                "error" if row.error else "ok",
                json.dumps(row.config, sort_keys=True),
                json.dumps(row.report.to_dict() if row.report else {"error": row.error}),
            ])


# ------------------------------------------------------------------- tables

def add_ranks(rows):
    """Per-dataset ranks (1 = best, ties share the mean rank) averaged over datasets.

    Returns ``{method: (mean accuracy rank, mean MAE rank)}`` over methods
    that completed on every dataset they were run on.
    """
    ok = [r for r in rows if r.report is not None]
    by_dataset = {}
    for r in ok:
        by_dataset.setdefault(r.dataset, []).append(r)
    acc_ranks, mae_ranks = {}, {}
    for group in by_dataset.values():
        a = rankdata([-r.report.accuracy for r in group], method="average")
        m = rankdata([r.report.mae for r in group], method="average")
        for r, ra, rm in zip(group, a, m):
            acc_ranks.setdefault(r.method, []).append(float(ra))
            mae_ranks.setdefault(r.method, []).append(float(rm))
    return {k: (float(np.mean(acc_ranks[k])), float(np.mean(mae_ranks[k]))) for k in acc_ranks}


def averages(rows):
    """Cross-dataset mean accuracy, MAE and unimodality per method."""
    per = {}
    for r in rows:
        if r.report is not None:
            per.setdefault(r.method, []).append(r.report)
    return {m: (float(np.mean([x.accuracy for x in v])), float(np.mean([x.mae for x in v])),
                float(np.mean([x.unimodality for x in v]))) for m, v in per.items()}


def _fmt(mean, std, digits):
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def format_text(rows):
    """Aligned plain-text tables: one block per dataset plus averages."""
    lines = []
    datasets = list(dict.fromkeys(r.dataset for r in rows))
    for ds in datasets:
        table = [("method", "%accuracy", "MAE", "%unimodal", "lambda")]
        for r in rows:
            if r.dataset != ds:
                continue
            if r.report is None:
                table.append((r.method, "failed", "", "", r.error or ""))
                continue
            p = r.report
            table.append((r.method, _fmt(p.accuracy, p.accuracy_std, 2), _fmt(p.mae, p.mae_std, 3),
                          _fmt(p.unimodality, p.unimodality_std, 2),
                          "" if r.lam is None else f"{r.lam:g}"))
        lines.append(ds)
        lines.extend(_align(table))
        lines.append("")
    ranks, avg = add_ranks(rows), averages(rows)
    if avg:
        table = [("average", "%accuracy", "MAE", "%unimodal", "acc rank", "MAE rank")]
        for m, (acc, mae, uni) in avg.items():
            ra, rm = ranks.get(m, (np.nan, np.nan))
            table.append((m, f"{acc:.1f}", f"{mae:.2f}", f"{uni:.1f}", f"{ra:.1f}", f"{rm:.1f}"))
        lines.extend(_align(table))
    return "\n".join(lines) + "\n"


def _align(table):
    widths = [max(len(str(row[i])) for row in table) for i in range(len(table[0]))]
    return ["  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip() for row in table]


CSV_FIELDS = ("dataset", "method", "lam", "accuracy", "accuracy_std", "mae", "mae_std",
              "unimodality", "unimodality_std", "error")


def write_csv(rows, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in rows:
            p = r.report
            w.writerow([r.dataset, r.method, "" if r.lam is None else r.lam]
                       + ([p.accuracy, p.accuracy_std, p.mae, p.mae_std, p.unimodality,
                           p.unimodality_std, ""] if p else [""] * 6 + [r.error]))


def run_benchmark(configs, out_dir, log=None):
    """Run every config, continuing past failures; write tables and records.

    Creates ``results.csv``, ``results.txt`` and appends to ``runs.tsv`` in
    ``out_dir``. Returns the list of :class:`ResultRow`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = {}
    rows = []
    for config in configs:
        sha = None
        try:
            key = (config.dataset, config.data_dir, config.split_seed, config.n_folds)
            if key not in cache:
                ds = load_dataset(config.dataset, config.data_dir)
                cache[key] = (ds, stratified_kfold(ds.labels, config.n_folds, config.split_seed))
            ds, split = cache[key]
            sha = ds.sha256
            row = run_config(config, ds, split)
        except Exception as exc:        # recorded per row; the run carries on
            row = ResultRow(config.dataset, config.loss, error=f"{type(exc).__name__}: {exc}",
                            config=config.to_dict())
        rows.append(row)
        append_record(out / "runs.tsv", row, sha)
        if log:
            log(_progress(row))
    write_csv(rows, out / "results.csv")
    (out / "results.txt").write_text(format_text(rows))
    return rows


def _progress(row):
    if row.report is None:
        return f"{row.dataset:14s} {row.method:9s} FAILED {row.error}"
    p = row.report
    return (f"{row.dataset:14s} {row.method:9s} acc {p.accuracy:6.2f} mae {p.mae:.3f} "
            f"unimodal {p.unimodality:6.2f} ({row.seconds:.0f}s)")


def suite_configs(datasets=TABULAR_SUITE, methods=ALL_METHODS, **overrides):
    return [ExperimentConfig(dataset=d, loss=m, **overrides) for d in datasets for m in methods]


# ------------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    dataset: str
    method: str
    rows: list                      # (lam, MetricsReport) on the evaluation folds
    validated_lam: float = None
    validation: dict = field(default_factory=dict)

    def report_for(self, lam):
        for value, rep in self.rows:
            if value == lam:
                return rep
        raise KeyError(lam)


def lambda_sweep(config, lambdas=LAMBDA_GRID, dataset=None, split=None, include_zero=True):
    """Evaluation-fold metrics for each ``lam`` plus the fold-1 choice.

    With ``include_zero`` a ``lam = 0`` row is added; it trains the plain
    cross-entropy objective.
    """
    if not config.penalised:
        raise ValueError(f"lambda sweep needs a penalised loss, not {config.loss!r}")
    if dataset is None:
        dataset = load_dataset(config.dataset, config.data_dir)
    if split is None:
        split = stratified_kfold(dataset.labels, config.n_folds, config.split_seed)
    lambdas = tuple(float(v) for v in lambdas)
    best, validation = validate_lambda(config, dataset, split, lambdas)
    grid = ((0.0,) if include_zero else ()) + lambdas
    rows = []
    for lam in grid:
        reports = [run_fold(config, dataset, split, f, lam) for f in split.evaluation_folds]
        rows.append((lam, MetricsReport.aggregate(reports)))
    return SweepResult(config.dataset, config.loss, rows, best, validation)


def write_sweep(result, out_dir):
    """Plot-ready CSV (one row per lambda) and an aligned text table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{result.dataset}_{result.method}"
    with (out / f"{stem}.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("lam", "accuracy", "accuracy_std", "mae", "mae_std", "unimodality",
                    "unimodality_std", "validation_accuracy", "selected"))
        for lam, rep in result.rows:
            val = result.validation.get(lam)
            w.writerow((lam, rep.accuracy, rep.accuracy_std, rep.mae, rep.mae_std,
                        rep.unimodality, rep.unimodality_std,
                        "" if val is None else val.accuracy, int(lam == result.validated_lam)))
    table = [("lambda", "%accuracy", "MAE", "%unimodal", "")]
    for lam, rep in result.rows:
        table.append((f"{lam:g}", _fmt(rep.accuracy, rep.accuracy_std, 2),
                      _fmt(rep.mae, rep.mae_std, 3), _fmt(rep.unimodality, rep.unimodality_std, 2),
                      "<- validated" if lam == result.validated_lam else ""))
    (out / f"{stem}.txt").write_text(
        f"{result.dataset} {result.method}\n" + "\n".join(_align(table)) + "\n")
    return out / f"{stem}.csv"


def with_overrides(config, **kwargs):
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
