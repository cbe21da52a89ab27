"""Dataset manifests, batch feature extraction and the feature-count experiment."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .image_io import load_image
from .mlkit import (
    GbtHyperparams,
    GbtModel,
    compute_metrics,
    feature_importance,
    predict_proba,
    select_top_k,
    train_gbt,
)
from .vectorize import N_FEATURES, feature_name, topo_feature_vector

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SPLITS = ("train", "test")
FEATURE_COUNTS = (50, 100, 200, 400)


class InputError(Exception):
    """Bad user input: unreadable manifest, malformed CSV, invalid config."""


class PartialFailure(Exception):
    """Some images could not be processed; the output was still written."""


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise InputError(f"duplicate manifest path {e.path}")
            seen.add(e.path)
            if not e.label:
                raise InputError(f"empty label for {e.path}")
            if e.split not in SPLITS:
                raise InputError(f"split must be one of {SPLITS}, got {e.split!r} for {e.path}")

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    @property
    def splits(self) -> list[str]:
        return [e.split for e in self.entries]


def read_manifest(path) -> DatasetManifest:
    """CSV ``path,label,split``; relative image paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:3]] != ["path", "label", "split"]:
        raise InputError(f"manifest {path} must start with header 'path,label,split'")
    entries = []
    for row in reader:
        p = Path(row["path"].strip())
        if not p.is_absolute():
            p = path.parent / p
        entries.append(ManifestEntry(p, (row["label"] or "").strip(), (row["split"] or "").strip()))
    if not entries:
        raise InputError(f"manifest {path} has no entries")
    return DatasetManifest(tuple(entries))


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label", "split"])
        for e in manifest.entries:
            p = e.path
            try:
                p = p.relative_to(path.parent)
            except ValueError:
                pass
            w.writerow([p.as_posix(), e.label, e.split])


# ---------------------------------------------------------------- feature CSV


def feature_header(n_features: int = N_FEATURES) -> list[str]:
    return ["label"] + [feature_name(j) for j in range(n_features)]


def write_feature_csv(path, labels, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.int64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(feature_header(matrix.shape[1] if matrix.ndim == 2 else N_FEATURES))
        for label, row in zip(labels, matrix):
            w.writerow([label, *row.tolist()])


def read_feature_csv(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read feature matrix {path}: {exc}") from None
    if not rows or rows[0][:1] != ["label"] or any(not h.startswith("f") for h in rows[0][1:]):
        raise InputError(f"{path} is not a feature matrix (expected header label,f000,...)")
    width = len(rows[0]) - 1
    labels, values = [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != width + 1:
            raise InputError(f"{path}:{n}: expected {width + 1} fields, found {len(row)}")
        labels.append(row[0])
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError:
            raise InputError(f"{path}:{n}: non-numeric feature value") from None
    return labels, np.array(values, dtype=np.float64).reshape(len(values), width)


# ---------------------------------------------------------------- extraction


@dataclass
class ExtractionResult:
    labels: list
    matrix: np.ndarray
    indices: list  # manifest positions of the rows that succeeded
    failures: list = field(default_factory=list)  # (index, path, error)
    timings: list = field(default_factory=list)  # (index, path, seconds)

    def log_records(self) -> list[dict]:
        failed = {i: err for i, _, err in self.failures}
        return [
            {"index": i, "path": str(p), "seconds": round(s, 6), "status": "failed" if i in failed else "ok",
             "error": failed.get(i)}
            for i, p, s in self.timings
        ]


def _extract_one(job):
    index, path, superlevel = job
    start = time.perf_counter()
    try:
        vec = topo_feature_vector(load_image(path), superlevel=superlevel).values
        return index, vec, None, time.perf_counter() - start
    except Exception as exc:  # noqa: BLE001 - every per-image failure is reported, not raised
        return index, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start


def default_workers() -> int:
    return os.cpu_count() or 1


def extract_features(manifest: DatasetManifest, workers: int | None = None, superlevel: bool = False) -> ExtractionResult:
    workers = workers or default_workers()
    jobs = [(i, e.path, superlevel) for i, e in enumerate(manifest.entries)]
    if workers == 1 or len(jobs) == 1:
        results = map(_extract_one, jobs)
        outcomes = list(results)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order, so rows follow the manifest
            outcomes = list(pool.map(_extract_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    width = N_FEATURES * (2 if superlevel else 1)
    labels, rows, indices, failures, timings = [], [], [], [], []
    for index, vec, err, seconds in outcomes:
        entry = manifest.entries[index]
        timings.append((index, entry.path, seconds))
        if err is not None:
            log.warning("failed to extract %s: %s", entry.path, err)
            failures.append((index, entry.path, err))
            continue
        labels.append(entry.label)
        rows.append(vec)
        indices.append(index)
    matrix = np.array(rows, dtype=np.int64).reshape(len(rows), width)
    return ExtractionResult(labels, matrix, indices, failures, timings)


def extract_dataset(manifest, out_csv, workers: int | None = None, superlevel: bool = False, log_path=None):
    """Write the feature matrix CSV and a JSON extraction log.

    Raises :class:`PartialFailure` after writing when some images failed and
    :class:`InputError` when all of them did.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = read_manifest(manifest)
    res = extract_features(manifest, workers, superlevel)
    log_path = Path(log_path) if log_path else Path(str(out_csv) + ".log.json")
    log_path.write_text(
        json.dumps({"images": len(manifest), "failed": len(res.failures), "log": res.log_records()}, indent=1)
    )
    if not res.indices:
        raise InputError("feature extraction failed for every image")
    write_feature_csv(out_csv, res.labels, res.matrix)
    if res.failures:
        names = ", ".join(str(p) for _, p, _ in res.failures)
        raise PartialFailure(f"{len(res.failures)} of {len(manifest)} images failed: {names}")
    return res


# ---------------------------------------------------------------- predictions


def write_predictions(path, y_true, proba, classes) -> None:
    proba = np.asarray(proba)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "pred", *[f"p:{c}" for c in classes]])
        for label, row in zip(y_true, proba):
            pred = classes[int(np.argmax(row))]
            w.writerow([label, pred, *[repr(float(v)) for v in row]])


def read_predictions(path) -> tuple[list, np.ndarray, list]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read predictions {path}: {exc}") from None
    if not rows or rows[0][:2] != ["label", "pred"] or not all(h.startswith("p:") for h in rows[0][2:]):
        raise InputError(f"{path} is not a predictions file (expected header label,pred,p:<class>,...)")
    classes = [h[2:] for h in rows[0][2:]]
    labels = [r[0] for r in rows[1:]]
    proba = np.array([[float(v) for v in r[2:]] for r in rows[1:]], dtype=np.float64)
    return labels, proba.reshape(len(labels), len(classes)), classes


def default_positive(classes):
    """Positive class for binary metrics: the last label in sorted order (e.g. ``malignant``)."""
    return sorted(classes)[-1] if len(classes) == 2 else None


# ---------------------------------------------------------------- training helpers


def train_top_k(X, y, k: int, hp: GbtHyperparams, ranking=None) -> tuple[GbtModel, list]:
    """Rank features with a full model (unless given), keep the top ``k``, retrain."""
    X = np.asarray(X, dtype=np.float64)
    if k == X.shape[1] and ranking is None:
        return train_gbt(X, y, hp), []
    if ranking is None:
        ranking = feature_importance(train_gbt(X, y, hp))
    Xk, index_map = select_top_k(ranking, X, k)
    model = train_gbt(Xk, y, hp)
    model.feature_map = index_map
    model.n_input_features = X.shape[1]
    return model, ranking


# ---------------------------------------------------------------- experiment


@dataclass
class ExperimentConfig:
    manifest: str
    output_dir: str
    feature_counts: tuple = FEATURE_COUNTS
    hyperparams: GbtHyperparams = field(default_factory=GbtHyperparams)
    seed: int = 0
    features: str | None = None  # optional precomputed feature CSV aligned with the manifest
    workers: int | None = None
    positive: str | None = None

    def __post_init__(self):
        counts = tuple(int(k) for k in self.feature_counts)
        if not counts:
            raise InputError("feature_counts must not be empty")
        if any(k < 1 or k > N_FEATURES for k in counts):
            raise InputError(f"feature counts must lie in [1, {N_FEATURES}]")
        self.feature_counts = counts
        if isinstance(self.hyperparams, dict):
            self.hyperparams = GbtHyperparams(**{**self.hyperparams, "seed": self.seed})

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read experiment config {path}: {exc}") from None
        base = path.parent
        for key in ("manifest", "output_dir", "features"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str(base / raw[key])
        raw.setdefault("hyperparams", {})
        try:
            return cls(**raw)
        except TypeError as exc:
            raise InputError(f"invalid experiment config: {exc}") from None


def table_columns(n_classes: int) -> list[str]:
    # mirrors the two halves of the feature-count table: multiclass | binary
    return ["B. Acc.", "Acc.", "AUC"] if n_classes > 2 else ["Acc.", "Sen.", "Spec."]


def _table_values(report, n_classes):
    if n_classes > 2:
        vals = (report.balanced_accuracy, report.accuracy, report.auc)
    else:
        vals = (report.accuracy, report.sensitivity, report.specificity)
    return [round(100 * v, 2) for v in vals]


def render_table(report: dict) -> str:
    cols = report["columns"]
    lines = ["| Models | " + " | ".join(cols) + " |", "|---" * (len(cols) + 1) + "|"]
    for row in report["rows"]:
        lines.append(f"| {row['model']} | " + " | ".join(f"{v:.2f}" for v in row["table"]) + " |")
    return "\n".join(lines)


def run_experiment(config: ExperimentConfig) -> dict:
    manifest = read_manifest(config.manifest)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.features:
        labels, X = read_feature_csv(config.features)
        if len(labels) != len(manifest):
            raise InputError(
                f"feature matrix has {len(labels)} rows but the manifest lists {len(manifest)} images"
            )
        splits = manifest.splits
    else:
        res = extract_features(manifest, config.workers)
        if res.failures:
            raise PartialFailure(f"{len(res.failures)} images failed to extract")
        labels, X = res.labels, res.matrix.astype(np.float64)
        splits = [manifest.entries[i].split for i in res.indices]
        write_feature_csv(out / "features.csv", labels, res.matrix)

    y = np.asarray(labels)
    split = np.asarray(splits)
    train, test = split == "train", split == "test"
    if not train.any() or not test.any():
        raise InputError("the experiment needs at least one train and one test image")
    if X.shape[1] < max(config.feature_counts):
        raise InputError(f"feature matrix has only {X.shape[1]} columns")

    hp = config.hyperparams
    ranking_model = train_gbt(X[train], y[train], hp)
    ranking = feature_importance(ranking_model)
    with open(out / "ranking.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "gain"])
        for r, (j, g) in enumerate(ranking, start=1):
            w.writerow([r, j, repr(g)])

    classes = ranking_model.classes
    positive = config.positive or default_positive(classes)
    rows = []
    for k in config.feature_counts:
        model, _ = train_top_k(X[train], y[train], k, hp, ranking=ranking)
        proba = predict_proba(model, X[test])
        pred_path = out / f"predictions_k{k}.csv"
        write_predictions(pred_path, y[test].tolist(), proba, classes)
        (out / f"model_k{k}.json").write_text(model.to_json())
        metrics = compute_metrics(y[test], proba, classes, positive)
        rows.append(
            {
                "model": f"{k} Features",
                "k": k,
                "predictions": pred_path.name,
                "metrics": metrics.to_dict(),
                "table": _table_values(metrics, len(classes)),
            }
        )
        log.info("k=%d: %s", k, metrics)

    report = {
        "task": "multiclass" if len(classes) > 2 else "binary",
        "classes": classes,
        "positive_class": positive if len(classes) == 2 else None,
        "n_train": int(train.sum()),
        "n_test": int(test.sum()),
        "hyperparams": asdict(hp),
        "columns": table_columns(len(classes)),
        "rows": rows,
    }
    report["table_markdown"] = render_table(report)
    return report
