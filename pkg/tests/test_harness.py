from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import canonical_result_bytes
from lesionbench.balance import balancer_weights
from lesionbench.errors import StratificationError, ValidationError
from lesionbench.harness import (
    Experiment,
    ReportFormat,
    RunResult,
    config_from_dict,
    load_dataset,
    result_to_json_str,
    run_bias_audit,
    run_benchmark,
    run_experiment,
    run_transfer,
    write_report,
)
from lesionbench.manifest import LesionClass
from lesionbench.synth import (
    make_bias_fixture,
    make_class_fixture,
    make_paired_class_fixture,
    write_fixture,
)

FAST_TRAIN = {"learning_rate": 0.05, "epochs": 6, "batch_size": 16}


def _transfer_config(tmp_path, counts=(12, 9, 9), seed=3, separation=2.0, **extra):
    dataset, table = make_class_fixture(
        {
            LesionClass.BENIGN: counts[0],
            LesionClass.MALIGNANT: counts[1],
            LesionClass.MELANOMA: counts[2],
        },
        dim=8,
        separation=separation,
        seed=seed,
    )
    paths = write_fixture(tmp_path, dataset, {"emb": table})
    raw = {
        "experiment": "transfer_weighted",
        "manifests": {"synth:sig": str(paths["manifest:synth:sig"])},
        "embeddings": str(paths["emb"]),
        "k": 3,
        "seed": seed,
        "train": FAST_TRAIN,
        **extra,
    }
    return config_from_dict(raw)


def test_transfer_weights_recomputed_per_fold(tmp_path) -> None:
    # 10 melanoma across 3 folds -> per-fold counts differ, so weights must too
    config = _transfer_config(tmp_path, counts=(12, 9, 10))
    result = run_transfer(config, weighted=True)
    assert result.banner == "test-distribution-informed weights"

    dataset = load_dataset(config)
    by_id = {s.id: s.lesion_class for s in dataset.samples}
    from lesionbench.splits import stratified_kfold

    folds = stratified_kfold(dataset, config.k, config.seed)
    seen = set()
    for fold_output, split in zip(result.folds, folds):
        train_counts = {c.value: 0 for c in LesionClass}
        test_counts = {c.value: 0 for c in LesionClass}
        for i in split.train_ids:
            train_counts[by_id[i].value] += 1
        for i in split.test_ids:
            test_counts[by_id[i].value] += 1
        expected = balancer_weights(train_counts, test_counts)
        assert fold_output.weights == expected.to_json()["weights"]
        assert fold_output.weight_fractions == expected.to_json()["fractions"]
        seen.add(tuple(sorted(fold_output.weights.items())))
    assert len(seen) > 1  # global counts would have given identical weights


def test_averaged_equals_mean_of_folds(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    result = run_transfer(config, weighted=False)
    jaccards = [f.report.jaccard_macro_percent for f in result.folds]
    assert result.averaged["jaccard_macro_percent"] == pytest.approx(
        sum(jaccards) / len(jaccards), abs=1e-9
    )
    for key in ("precision", "recall", "f1"):
        values = [f.report.micro[key] for f in result.folds]
        assert result.averaged["micro"][key] == pytest.approx(sum(values) / len(values), abs=1e-9)


def test_runs_reproducible_byte_identical(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    first = run_transfer(config, weighted=True)
    second = run_transfer(config, weighted=True)
    assert canonical_result_bytes(result_to_json_str(first)) == canonical_result_bytes(
        result_to_json_str(second)
    )


def test_balanced_counts_mean_one_weights_match_unweighted(tmp_path) -> None:
    # equal class counts + MEAN_ONE -> every weight is exactly 1 -> identical run
    config = _transfer_config(tmp_path, counts=(9, 9, 9), normalize="mean-one")
    weighted = run_transfer(config, weighted=True)
    unweighted = run_transfer(config, weighted=False)
    for fold in weighted.folds:
        assert set(fold.weights.values()) == {1.0}
    for fw, fu in zip(weighted.folds, unweighted.folds):
        assert fw.report.confusion == fu.report.confusion
        assert fw.report == fu.report


def test_run_result_json_roundtrip(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    result = run_transfer(config, weighted=True)
    restored = RunResult.from_json(json.loads(result_to_json_str(result)))
    assert restored == result


def test_write_report_files(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    result = run_transfer(config, weighted=True)
    json_path = write_report(result, ReportFormat.JSON, tmp_path / "r.json")
    md_path = write_report(result, ReportFormat.MARKDOWN, tmp_path / "r.md")
    parsed = json.loads(json_path.read_text())
    assert parsed["experiment"] == "transfer_weighted"
    md = md_path.read_text()
    assert "| Jaccard Similarity index |" in md
    assert "test-distribution-informed weights" in md
    assert "| benign |" in md


def test_write_report_empty_folds_rejected(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    result = run_transfer(config, weighted=False)
    empty = RunResult(
        experiment=result.experiment,
        config_echo=result.config_echo,
        folds=(),
        averaged=result.averaged,
        banner=None,
        timestamp=result.timestamp,
        duration_seconds=0.0,
    )
    with pytest.raises(ValidationError):
        write_report(empty, ReportFormat.JSON, tmp_path / "x.json")


def test_transfer_missing_embedding_id_named(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    emb_path = config.embeddings
    lines = emb_path.read_text().strip().splitlines()
    emb_path.write_text("\n".join(lines[:-1]) + "\n")  # drop the last sample
    with pytest.raises(ValidationError, match="synth:sig/"):
        run_transfer(config, weighted=False)


def test_bias_audit_needs_two_sources(tmp_path) -> None:
    dataset, table = make_class_fixture(
        {LesionClass.BENIGN: 6, LesionClass.MALIGNANT: 6, LesionClass.MELANOMA: 6},
        dim=4,
        separation=0.0,
        seed=0,
    )
    paths = write_fixture(tmp_path, dataset, {"emb": table})
    config = config_from_dict(
        {
            "experiment": "bias_audit",
            "manifests": {"synth:sig": str(paths["manifest:synth:sig"])},
            "embeddings": str(paths["emb"]),
            "k": 3,
            "train": FAST_TRAIN,
        }
    )
    with pytest.raises(ValidationError, match="2 sources"):
        run_bias_audit(config)


def test_bias_audit_runs_and_reports_source_classes(tmp_path) -> None:
    dataset, table = make_bias_fixture(n_sources=3, per_source=9, dim=4, shift=0.0, seed=1)
    tables = {"emb": table}
    paths = write_fixture(tmp_path, dataset, tables)
    config = config_from_dict(
        {
            "experiment": "bias_audit",
            "manifests": {
                "synth:src0": str(paths["manifest:synth:src0"]),
                "synth:src1": str(paths["manifest:synth:src1"]),
                "synth:src2": str(paths["manifest:synth:src2"]),
            },
            "embeddings": str(paths["emb"]),
            "k": 3,
            "seed": 1,
            "train": FAST_TRAIN,
        }
    )
    result = run_bias_audit(config)
    assert set(result.averaged["per_class"]) == {"synth:src0", "synth:src1", "synth:src2"}
    assert len(result.folds) == 3


def test_benchmark_k_above_smallest_class_fails(tmp_path) -> None:
    config = _transfer_config(tmp_path, counts=(12, 9, 9))
    raw_config = config_from_dict(
        {
            "experiment": "benchmark",
            "manifests": {str(k): str(v) for k, v in config.manifests.items()},
            "pixels": str(config.embeddings),
            "k": 12,
            "train": FAST_TRAIN,
        }
    )
    with pytest.raises(StratificationError):
        run_benchmark(raw_config)


def test_benchmark_on_pixel_table(tmp_path) -> None:
    dataset, tables = make_paired_class_fixture(
        {LesionClass.BENIGN: 8, LesionClass.MALIGNANT: 6, LesionClass.MELANOMA: 6},
        views=[(16, 0.5, "pix")],
        seed=2,
    )
    paths = write_fixture(tmp_path, dataset, {"pix": tables[0]})
    config = config_from_dict(
        {
            "experiment": "benchmark",
            "manifests": {"synth:sig": str(paths["manifest:synth:sig"])},
            "pixels": str(paths["pix"]),
            "k": 3,
            "seed": 2,
            "train": FAST_TRAIN,
        }
    )
    result = run_benchmark(config)
    assert result.experiment is Experiment.BENCHMARK
    assert set(result.averaged["per_class"]) == {"benign", "malignant", "melanoma"}


def test_benchmark_on_payload_images(tmp_path) -> None:
    from PIL import Image

    from lesionbench.manifest import SampleRecord, group_label, synth_source
    from lesionbench.synth import write_manifest_csv

    rng = np.random.default_rng(0)
    source = synth_source("img")
    records = []
    labels = ["nevus", "melanoma", "basal cell carcinoma"] * 3
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    for i, label in enumerate(labels):
        name = f"img_{i}.png"
        Image.fromarray(rng.integers(0, 255, size=(24, 24), dtype=np.uint8), "L").save(
            img_dir / name
        )
        records.append(
            SampleRecord(
                id=f"s{i}",
                source=source,
                raw_label=label,
                lesion_class=group_label(label),
                payload=name,
            )
        )
    manifest_path = tmp_path / "m.csv"
    write_manifest_csv(manifest_path, records)
    config = config_from_dict(
        {
            "experiment": "benchmark",
            "manifests": {"synth:img": str(manifest_path)},
            "image_root": str(img_dir),
            "thumbnail_edge": 4,
            "k": 3,
            "train": FAST_TRAIN,
        }
    )
    result = run_benchmark(config)
    assert len(result.folds) == 3
    # 4x4 grayscale thumbnails -> 16 features
    assert result.config_echo["thumbnail_edge"] == 4


def test_config_validation() -> None:
    with pytest.raises(ValidationError, match="dataset paths"):
        config_from_dict({"experiment": "benchmark"})
    with pytest.raises(ValidationError, match="unknown config keys"):
        config_from_dict({"experiment": "benchmark", "nope": 1, "manifests": {}})
    with pytest.raises(ValidationError, match="unknown experiment"):
        config_from_dict({"experiment": "magic", "manifests": {"ph2": "x.csv"}})


def test_config_requires_embeddings_for_transfer(tmp_path) -> None:
    manifest = tmp_path / "m.csv"
    manifest.write_text("id,raw_label,payload\na,nevus,x\n")
    with pytest.raises(ValidationError, match="embedding"):
        config_from_dict(
            {"experiment": "transfer_weighted", "manifests": {"ph2": str(manifest)}}
        )


def test_config_rejects_missing_paths(tmp_path) -> None:
    with pytest.raises(ValidationError, match="does not exist"):
        config_from_dict(
            {"experiment": "benchmark", "manifests": {"ph2": str(tmp_path / "nope.csv")}}
        )


def test_run_experiment_dispatch(tmp_path) -> None:
    config = _transfer_config(tmp_path)
    result = run_experiment(config)
    assert result.experiment is Experiment.TRANSFER_WEIGHTED
