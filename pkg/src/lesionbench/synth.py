"""Synthetic fixtures: desk-scale stand-ins for the dermoscopy corpora.

Feature vectors are unit-variance Gaussians. Group structure is injected by
mean offsets along orthogonal axes: offset norm 0 means all groups share one
distribution; offset norm s puts any two group means 's * sqrt(2)' apart.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, write_embeddings
from .manifest import (
    CombinedDataset,
    LesionClass,
    LESION_CLASS_ORDER,
    SampleRecord,
    Source,
    combine,
    prefixed_id,
    synth_source,
)

# Raw labels that group back onto each lesion class.
RAW_LABEL_FOR_CLASS = {
    LesionClass.BENIGN: "nevus",
    LesionClass.MALIGNANT: "basal cell carcinoma",
    LesionClass.MELANOMA: "melanoma",
}


def _records(source: Source, classes: list[LesionClass]) -> list[SampleRecord]:
    return [
        SampleRecord(
            id=f"s{i:04d}",
            source=source,
            raw_label=RAW_LABEL_FOR_CLASS[c],
            lesion_class=c,
            payload=f"vec:{i}",
        )
        for i, c in enumerate(classes)
    ]


def make_bias_fixture(
    n_sources: int = 3,
    per_source: int = 60,
    dim: int = 16,
    shift: float = 0.0,
    seed: int = 0,
    backbone: str = "synthetic-gaussian",
) -> tuple[CombinedDataset, EmbeddingTable]:
    """Multi-source dataset whose features may carry a per-source signature.

    shift = 0 draws every source from the same standard normal; shift = s
    offsets source j's mean by s along axis j.
    """
    if dim < n_sources:
        raise ValueError("dim must be >= n_sources to give each source its own axis")
    rng = np.random.default_rng(seed)
    manifests = []
    vectors: dict[str, np.ndarray] = {}
    for j in range(n_sources):
        source = synth_source(f"src{j}")
        classes = [_class_cycle(i) for i in range(per_source)]
        records = _records(source, classes)
        manifests.append((source, records))
        mean = np.zeros(dim)
        mean[j] = shift
        feats = rng.normal(size=(per_source, dim)) + mean
        for record, vec in zip(records, feats):
            vectors[prefixed_id(source, record.id)] = vec
    dataset = combine(manifests)
    return dataset, EmbeddingTable(dim=dim, backbone=backbone, vectors=vectors)


def _class_cycle(i: int) -> LesionClass:
    return LESION_CLASS_ORDER[i % len(LESION_CLASS_ORDER)]


def make_class_fixture(
    class_counts: dict[LesionClass, int],
    dim: int,
    separation: float,
    seed: int = 0,
    source_name: str = "sig",
    backbone: str = "synthetic-gaussian",
) -> tuple[CombinedDataset, EmbeddingTable]:
    """Single-source dataset whose features carry lesion-class signal.

    Class means sit on orthogonal axes at distance ``separation`` from each
    other (offset norm separation / sqrt(2) per class).
    """
    dataset, (table,) = make_paired_class_fixture(
        class_counts, [(dim, separation, backbone)], seed=seed, source_name=source_name
    )
    return dataset, table


def make_paired_class_fixture(
    class_counts: dict[LesionClass, int],
    views: list[tuple[int, float, str]],
    seed: int = 0,
    source_name: str = "sig",
) -> tuple[CombinedDataset, list[EmbeddingTable]]:
    """One dataset, several feature views of it.

    Each view is (dim, separation, backbone name); all views are generated
    from the same class assignment so they carry the same signal at
    different strengths.
    """
    rng = np.random.default_rng(seed)
    classes: list[LesionClass] = []
    for c in LESION_CLASS_ORDER:
        classes.extend([c] * class_counts.get(c, 0))
    # Interleave classes deterministically so folds see no ordering artifact.
    order = rng.permutation(len(classes))
    classes = [classes[i] for i in order]

    source = synth_source(source_name)
    records = _records(source, classes)
    dataset = combine([(source, records)])

    class_index = {c: i for i, c in enumerate(LESION_CLASS_ORDER)}
    tables = []
    for dim, separation, backbone in views:
        if dim < len(LESION_CLASS_ORDER):
            raise ValueError("dim must be >= number of classes")
        offset = separation / np.sqrt(2.0)
        vectors: dict[str, np.ndarray] = {}
        feats = rng.normal(size=(len(records), dim))
        for record, vec in zip(records, feats):
            vec = vec.copy()
            vec[class_index[record.lesion_class]] += offset
            vectors[record_key(source, record)] = vec
        tables.append(EmbeddingTable(dim=dim, backbone=backbone, vectors=vectors))
    return dataset, tables


def record_key(source: Source, record: SampleRecord) -> str:
    return prefixed_id(source, record.id)


def write_manifest_csv(path: str | Path, records: list[SampleRecord]) -> None:
    """Manifest CSV for records carrying local (unprefixed) ids."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "raw_label", "payload"])
        for record in records:
            writer.writerow([record.id, record.raw_label, record.payload])


def write_fixture(
    out_dir: str | Path,
    dataset: CombinedDataset,
    tables: dict[str, EmbeddingTable],
) -> dict[str, Path]:
    """Materialize a fixture: one manifest CSV per source, one JSONL per table.

    Returns {"manifest:<source>": path, "<table name>": path}.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    by_source: dict[Source, list[SampleRecord]] = {}
    for sample in dataset.samples:
        by_source.setdefault(sample.source, []).append(sample)
    for source, samples in by_source.items():
        prefix = f"{source}/"
        local = [
            SampleRecord(
                id=s.id[len(prefix):],
                source=source,
                raw_label=s.raw_label,
                lesion_class=s.lesion_class,
                payload=s.payload,
            )
            for s in samples
        ]
        path = out_dir / f"manifest_{str(source).replace(':', '_')}.csv"
        write_manifest_csv(path, local)
        paths[f"manifest:{source}"] = path

    for name, table in tables.items():
        path = out_dir / f"{name}.jsonl"
        rows = []
        for sample in dataset.samples:
            source = sample.source
            local_id = sample.id[len(f"{source}/"):]
            rows.append((source, local_id, sample.raw_label, table.get(sample.id)))
        write_embeddings(path, table.backbone, table.dim, rows)
        paths[name] = path
    return paths
