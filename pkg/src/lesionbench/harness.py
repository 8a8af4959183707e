"""Experiment orchestration: bias audit, scratch benchmark, transfer probes.

Every experiment trains the dense classifier over k stratified folds and
reports fold-level plus averaged metrics. Runs are reproducible: fold f
trains with seed ``base_seed + f``, and identical config+seed produces
byte-identical JSON reports (up to the ``meta`` timing block).
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .balance import ClassWeights, NormalizeMode, balancer_weights, normalize_weights
from .embeddings import EmbeddingTable, load_embeddings
from .errors import ValidationError
from .manifest import (
    CombinedDataset,
    DEFAULT_MALIGNANT_LABELS,
    LESION_CLASS_ORDER,
    Source,
    combine,
    parse_manifest,
)
from .metrics import EvaluationReport, evaluate
from .nnet import Architecture, TrainConfig, TrainHistory, predict, train
from .splits import stratified_kfold_indices

WEIGHT_BANNER = "test-distribution-informed weights"


class Experiment(Enum):
    BIAS_AUDIT = "bias_audit"
    BENCHMARK = "benchmark"
    TRANSFER_UNWEIGHTED = "transfer_unweighted"
    TRANSFER_WEIGHTED = "transfer_weighted"

    @classmethod
    def parse(cls, text: str) -> "Experiment":
        key = text.strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown experiment {text!r}") from None


class FeatureKind(Enum):
    EMBEDDINGS = "embeddings"
    PIXELS = "pixels"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    manifests: dict[Source, Path] = field(default_factory=dict)
    dataset_json: Path | None = None
    embeddings: Path | None = None
    pixels: Path | None = None
    features: FeatureKind | None = None  # bias audit payload choice
    image_root: Path | None = None
    thumbnail_edge: int = 16
    k: int = 3
    seed: int = 0
    normalize: NormalizeMode = NormalizeMode.NONE
    literal_alg1: bool = False
    learning_rate: float = 0.0001
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 16
    hidden_dims: tuple[int, ...] = ()
    malignant_labels: tuple[str, ...] = tuple(sorted(DEFAULT_MALIGNANT_LABELS))
    out: Path | None = None

    def __post_init__(self) -> None:
        if not self.manifests and self.dataset_json is None:
            raise ValidationError("config needs dataset paths: manifests or dataset_json")
        if self.experiment in (Experiment.TRANSFER_UNWEIGHTED, Experiment.TRANSFER_WEIGHTED):
            if self.embeddings is None:
                raise ValidationError("transfer experiments require an embedding file")
        for path in self._input_paths():
            if not path.exists():
                raise ValidationError(f"path does not exist: {path}")
        if self.k < 2:
            raise ValidationError(f"k must be >= 2, got {self.k}")

    def _input_paths(self) -> list[Path]:
        paths = list(self.manifests.values())
        for p in (self.dataset_json, self.embeddings, self.pixels):
            if p is not None:
                paths.append(p)
        return paths

    def train_config(self, seed: int, class_weights: tuple[float, ...] | None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
            class_weights=class_weights,
        )

    def echo(self) -> dict:
        """JSON-safe snapshot embedded in reports (stable across runs)."""
        return {
            "experiment": self.experiment.value,
            "manifests": {str(s): str(p) for s, p in sorted(self.manifests.items(), key=lambda kv: str(kv[0]))},
            "dataset_json": str(self.dataset_json) if self.dataset_json else None,
            "embeddings": str(self.embeddings) if self.embeddings else None,
            "pixels": str(self.pixels) if self.pixels else None,
            "features": self.features.value if self.features else None,
            "image_root": str(self.image_root) if self.image_root else None,
            "thumbnail_edge": self.thumbnail_edge,
            "k": self.k,
            "seed": self.seed,
            "normalize": self.normalize.value,
            "literal_alg1": self.literal_alg1,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "hidden_dims": list(self.hidden_dims),
        }


def config_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from JSON-ish keys; relative paths resolve against base_dir."""

    def path_of(value) -> Path:
        p = Path(value)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    known = {
        "experiment", "manifests", "dataset", "dataset_json", "embeddings", "pixels",
        "features", "image_root", "thumbnail_edge", "k", "seed", "normalize",
        "literal_alg1", "train", "malignant_labels", "out",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")

    train_raw = dict(raw.get("train") or {})
    train_known = {"learning_rate", "momentum", "epochs", "batch_size", "hidden_dims"}
    bad = set(train_raw) - train_known
    if bad:
        raise ValidationError(f"unknown train config keys: {', '.join(sorted(bad))}")

    manifests = {
        Source.parse(name): path_of(p) for name, p in (raw.get("manifests") or {}).items()
    }
    dataset_json = raw.get("dataset_json", raw.get("dataset"))
    features = raw.get("features")
    kwargs = dict(
        experiment=Experiment.parse(raw["experiment"]),
        manifests=manifests,
        dataset_json=path_of(dataset_json) if dataset_json else None,
        embeddings=path_of(raw["embeddings"]) if raw.get("embeddings") else None,
        pixels=path_of(raw["pixels"]) if raw.get("pixels") else None,
        features=FeatureKind(features) if features else None,
        image_root=path_of(raw["image_root"]) if raw.get("image_root") else None,
        thumbnail_edge=int(raw.get("thumbnail_edge", 16)),
        k=int(raw.get("k", 3)),
        seed=int(raw.get("seed", 0)),
        normalize=NormalizeMode.parse(raw.get("normalize", "none")),
        literal_alg1=bool(raw.get("literal_alg1", False)),
    )
    if raw.get("malignant_labels") is not None:
        kwargs["malignant_labels"] = tuple(sorted(str(x).lower() for x in raw["malignant_labels"]))
    if raw.get("out"):
        kwargs["out"] = path_of(raw["out"])
    for key in train_known:
        if key in train_raw:
            value = tuple(train_raw[key]) if key == "hidden_dims" else train_raw[key]
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_dataset(config: ExperimentConfig) -> CombinedDataset:
    if config.dataset_json is not None:
        with config.dataset_json.open("r", encoding="utf-8") as fh:
            return CombinedDataset.from_json(json.load(fh))
    malignant = frozenset(config.malignant_labels)
    manifests = []
    for source, path in sorted(config.manifests.items(), key=lambda kv: str(kv[0])):
        with path.open("r", encoding="utf-8") as fh:
            manifests.append((source, parse_manifest(fh, source, malignant)))
    return combine(manifests)


def _pixels_from_images(config: ExperimentConfig, dataset: CombinedDataset) -> np.ndarray:
    """Grayscale thumbnails, flattened and scaled to [0, 1]."""
    from PIL import Image

    edge = config.thumbnail_edge
    root = config.image_root or Path(".")
    rows = []
    for sample in dataset.samples:
        path = Path(sample.payload)
        if not path.is_absolute():
            path = root / path
        try:
            with Image.open(path) as img:
                gray = img.convert("L").resize((edge, edge), Image.BILINEAR)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read image for id {sample.id!r}: {exc}") from None
        rows.append(np.asarray(gray, dtype=np.float64).reshape(-1) / 255.0)
    return np.stack(rows)


def _feature_matrix(
    config: ExperimentConfig, dataset: CombinedDataset, kind: FeatureKind
) -> np.ndarray:
    if kind is FeatureKind.EMBEDDINGS:
        if config.embeddings is None:
            raise ValidationError("no embedding file configured")
        table = load_embeddings(config.embeddings)
        return _matrix_from_table(table, dataset)
    if config.pixels is not None:
        table = load_embeddings(config.pixels)
        return _matrix_from_table(table, dataset)
    return _pixels_from_images(config, dataset)


def _matrix_from_table(table: EmbeddingTable, dataset: CombinedDataset) -> np.ndarray:
    missing = [s.id for s in dataset.samples if s.id not in table]
    if missing:
        raise ValidationError(f"embedding table is missing id {missing[0]!r} (and {len(missing) - 1} more)")
    return table.matrix(dataset.ids())


@dataclass(frozen=True)
class FoldOutput:
    fold_index: int
    report: EvaluationReport
    history: TrainHistory
    weights: dict[str, float] | None = None
    weight_fractions: dict[str, str] | None = None

    def to_json(self) -> dict:
        return {
            "fold": self.fold_index,
            "report": self.report.to_json(),
            "history": self.history.to_json(),
            "weights": self.weights,
            "weight_fractions": self.weight_fractions,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FoldOutput":
        history = TrainHistory(**{k: list(v) for k, v in obj["history"].items()})
        return cls(
            fold_index=obj["fold"],
            report=EvaluationReport.from_json(obj["report"]),
            history=history,
            weights=obj.get("weights"),
            weight_fractions=obj.get("weight_fractions"),
        )


@dataclass(frozen=True)
class RunResult:
    experiment: Experiment
    config_echo: dict
    folds: tuple[FoldOutput, ...]
    averaged: dict
    banner: str | None
    timestamp: str
    duration_seconds: float

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment.value,
            "config": self.config_echo,
            "folds": [f.to_json() for f in self.folds],
            "averaged": self.averaged,
            "banner": self.banner,
            "meta": {"timestamp": self.timestamp, "duration_seconds": self.duration_seconds},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunResult":
        return cls(
            experiment=Experiment(obj["experiment"]),
            config_echo=obj["config"],
            folds=tuple(FoldOutput.from_json(f) for f in obj["folds"]),
            averaged=obj["averaged"],
            banner=obj.get("banner"),
            timestamp=obj["meta"]["timestamp"],
            duration_seconds=obj["meta"]["duration_seconds"],
        )


def average_reports(reports: Sequence[EvaluationReport]) -> dict:
    """Arithmetic means of every scalar metric across folds."""
    if not reports:
        raise ValidationError("no fold reports to average")
    n = len(reports)
    class_names = reports[0].confusion.class_names
    averaged = {
        "jaccard_macro_percent": sum(r.jaccard_macro_percent for r in reports) / n,
        "micro": {
            key: sum(r.micro[key] for r in reports) / n for key in ("precision", "recall", "f1")
        },
        "macro": {
            key: sum(r.macro[key] for r in reports) / n for key in ("precision", "recall", "f1")
        },
        "per_class": {
            name: {
                key: sum(r.per_class[name][key] for r in reports) / n
                for key in ("jaccard", "precision", "recall", "f1")
            }
            for name in class_names
        },
    }
    return averaged


def _fold_weights(
    y: np.ndarray,
    train_idx: Sequence[int],
    test_idx: Sequence[int],
    class_names: Sequence[str],
    normalize: NormalizeMode,
    literal: bool,
) -> tuple[ClassWeights, tuple[float, ...]]:
    train_counts = Counter(class_names[y[i]] for i in train_idx)
    test_counts = Counter(class_names[y[i]] for i in test_idx)
    for name in class_names:
        train_counts.setdefault(name, 0)
        test_counts.setdefault(name, 0)
    weights = balancer_weights(dict(train_counts), dict(test_counts), literal=literal)
    weights = normalize_weights(weights, normalize)
    return weights, tuple(weights.vector(list(class_names)))


def _run_folds(
    config: ExperimentConfig,
    X: np.ndarray,
    y: np.ndarray,
    class_names: tuple[str, ...],
    weighted: bool,
) -> tuple[FoldOutput, ...]:
    folds = stratified_kfold_indices([class_names[t] for t in y], config.k, config.seed)
    all_idx = set(range(len(y)))
    outputs = []
    for fold_index, test_idx in enumerate(folds):
        train_idx = sorted(all_idx - set(test_idx))
        weight_vec: tuple[float, ...] | None = None
        weights_json: dict[str, float] | None = None
        fractions_json: dict[str, str] | None = None
        if weighted:
            weights, weight_vec = _fold_weights(
                y, train_idx, test_idx, class_names, config.normalize, config.literal_alg1
            )
            as_json = weights.to_json()
            weights_json = as_json["weights"]
            fractions_json = as_json["fractions"]
        train_view = [(X[i], int(y[i])) for i in train_idx]
        test_view = [(X[i], int(y[i])) for i in test_idx]
        arch = Architecture(
            input_dim=X.shape[1],
            hidden_dims=config.hidden_dims,
            num_classes=len(class_names),
        )
        params, history = train(
            train_view,
            test_view,
            config.train_config(seed=config.seed + fold_index, class_weights=weight_vec),
            arch=arch,
        )
        pred = predict(params, X[test_idx])
        report = evaluate([int(y[i]) for i in test_idx], pred.tolist(), class_names)
        outputs.append(
            FoldOutput(
                fold_index=fold_index,
                report=report,
                history=history,
                weights=weights_json,
                weight_fractions=fractions_json,
            )
        )
    return tuple(outputs)


def _finish(
    experiment: Experiment,
    config: ExperimentConfig,
    folds: tuple[FoldOutput, ...],
    banner: str | None,
    started: float,
) -> RunResult:
    return RunResult(
        experiment=experiment,
        config_echo=config.echo(),
        folds=folds,
        averaged=average_reports([f.report for f in folds]),
        banner=banner,
        timestamp=datetime.now(timezone.utc).isoformat(),
        duration_seconds=time.perf_counter() - started,
    )


def _lesion_matrix_and_labels(
    config: ExperimentConfig, dataset: CombinedDataset, kind: FeatureKind
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    class_names = tuple(c.value for c in LESION_CLASS_ORDER)
    index = {c: i for i, c in enumerate(LESION_CLASS_ORDER)}
    for c in LESION_CLASS_ORDER:
        if dataset.class_counts.get(c, 0) < config.k:
            from .errors import StratificationError

            raise StratificationError(
                f"class {c.value} has {dataset.class_counts.get(c, 0)} samples, fewer than k={config.k}"
            )
    X = _feature_matrix(config, dataset, kind)
    y = np.asarray([index[s.lesion_class] for s in dataset.samples], dtype=np.int64)
    return X, y, class_names


def run_bias_audit(config: ExperimentConfig) -> RunResult:
    """Train the classifier to name each sample's source dataset."""
    started = time.perf_counter()
    dataset = load_dataset(config)
    sources = sorted({str(s.source) for s in dataset.samples})
    if len(sources) < 2:
        raise ValidationError("bias audit needs at least 2 sources")
    index = {name: i for i, name in enumerate(sources)}
    y = np.asarray([index[str(s.source)] for s in dataset.samples], dtype=np.int64)
    kind = config.features or (
        FeatureKind.EMBEDDINGS if config.embeddings is not None else FeatureKind.PIXELS
    )
    X = _feature_matrix(config, dataset, kind)
    folds = _run_folds(config, X, y, tuple(sources), weighted=False)
    return _finish(Experiment.BIAS_AUDIT, config, folds, None, started)


def run_benchmark(config: ExperimentConfig) -> RunResult:
    """Scratch training on raw-pixel features over stratified folds."""
    started = time.perf_counter()
    dataset = load_dataset(config)
    X, y, class_names = _lesion_matrix_and_labels(config, dataset, FeatureKind.PIXELS)
    folds = _run_folds(config, X, y, class_names, weighted=False)
    return _finish(Experiment.BENCHMARK, config, folds, None, started)


def run_transfer(config: ExperimentConfig, weighted: bool) -> RunResult:
    """Dense+softmax probe over precomputed embeddings, optionally weighted.

    When weighted, each fold's class weights come from the balancer applied
    to that fold's own train/held-out counts; the report banner flags that
    held-out counts inform the weights.
    """
    started = time.perf_counter()
    dataset = load_dataset(config)
    X, y, class_names = _lesion_matrix_and_labels(config, dataset, FeatureKind.EMBEDDINGS)
    folds = _run_folds(config, X, y, class_names, weighted=weighted)
    experiment = Experiment.TRANSFER_WEIGHTED if weighted else Experiment.TRANSFER_UNWEIGHTED
    banner = WEIGHT_BANNER if weighted else None
    return _finish(experiment, config, folds, banner, started)


def run_experiment(config: ExperimentConfig) -> RunResult:
    if config.experiment is Experiment.BIAS_AUDIT:
        return run_bias_audit(config)
    if config.experiment is Experiment.BENCHMARK:
        return run_benchmark(config)
    return run_transfer(config, weighted=config.experiment is Experiment.TRANSFER_WEIGHTED)


class ReportFormat(Enum):
    JSON = "json"
    MARKDOWN = "markdown"


def result_to_json_str(result: RunResult) -> str:
    return json.dumps(result.to_json(), indent=2, sort_keys=True)


def result_to_markdown(result: RunResult) -> str:
    """Summary tables: headline metrics, per-class breakdown, per-fold rows."""
    avg = result.averaged
    lines = [f"# {result.experiment.value} results", ""]
    if result.banner:
        lines += [f"> **Note:** {result.banner}", ""]
    lines += [
        "| Metric | Value |",
        "| --- | --- |",
        f"| Jaccard Similarity index | {avg['jaccard_macro_percent']:.2f} |",
        f"| Overall precision | {avg['micro']['precision']:.2f} |",
        f"| Overall recall | {avg['micro']['recall']:.2f} |",
        f"| Overall F1-score | {avg['micro']['f1']:.2f} |",
        f"| Macro F1-score | {avg['macro']['f1']:.2f} |",
        "",
        "## Per-class (averaged over folds)",
        "",
        "| Class | Jaccard | Precision | Recall | F1 |",
        "| --- | --- | --- | --- | --- |",
    ]
    for name, values in avg["per_class"].items():
        lines.append(
            f"| {name} | {100 * values['jaccard']:.2f} | {values['precision']:.2f} "
            f"| {values['recall']:.2f} | {values['f1']:.2f} |"
        )
    lines += [
        "",
        "## Folds",
        "",
        "| Fold | Jaccard | Micro F1 | Weights |",
        "| --- | --- | --- | --- |",
    ]
    for fold in result.folds:
        weights = (
            ", ".join(f"{k}={v:.4f}" for k, v in fold.weights.items()) if fold.weights else "-"
        )
        lines.append(
            f"| {fold.fold_index} | {fold.report.jaccard_macro_percent:.2f} "
            f"| {fold.report.micro['f1']:.2f} | {weights} |"
        )
    lines.append("")
    return "\n".join(lines)


def write_report(result: RunResult, fmt: ReportFormat, out_path: str | Path) -> Path:
    """Persist a run; JSON keeps full precision, markdown is for humans."""
    if not result.folds:
        raise ValidationError("cannot write a report with an empty fold list")
    out_path = Path(out_path)
    text = result_to_json_str(result) if fmt is ReportFormat.JSON else result_to_markdown(result)
    out_path.write_text(text + "\n", encoding="utf-8")
    return out_path
