"""Command line interface.

    harness ingest --manifest isic2019=a.csv --manifest ph2=b.csv --out dir
    harness split --dataset dir/dataset.json --k 3 --seed 7 --out dir
    harness weights --train-counts benign=88,malignant=10,melanoma=31 \
                    --test-counts benign=44,malignant=5,melanoma=15
    harness bias-audit|benchmark|transfer --config config.json [--seed N] [--out dir]
    harness report --result dir/report.json --format markdown

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .balance import NormalizeMode, balancer_weights, normalize_weights
from .errors import EXIT_IO, EXIT_OK, EXIT_VALIDATION, ValidationError
from .harness import (
    Experiment,
    ExperimentConfig,
    ReportFormat,
    RunResult,
    config_from_dict,
    load_dataset,
    result_to_json_str,
    result_to_markdown,
    run_experiment,
    write_report,
)
from .manifest import (
    CombinedDataset,
    DEFAULT_MALIGNANT_LABELS,
    Source,
    combine,
    parse_manifest,
)
from .splits import splits_to_json, stratified_kfold


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--k", type=int, help="fold count")
    parser.add_argument(
        "--literal-alg1",
        action="store_true",
        default=None,
        help="use the literal alternating reading of the balancer recipe",
    )
    parser.add_argument(
        "--normalize",
        choices=["none", "mean-one", "max-one"],
        help="weight normalization mode",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="merge per-source manifests into one dataset")
    _shared_flags(p)
    p.add_argument(
        "--manifest",
        action="append",
        default=[],
        metavar="SOURCE=PATH",
        help="per-source manifest CSV; repeatable",
    )

    p = sub.add_parser("split", help="stratified k-fold split of a dataset")
    _shared_flags(p)
    p.add_argument("--dataset", type=Path, help="combined dataset JSON from ingest")

    p = sub.add_parser("weights", help="class weights from train/test counts")
    _shared_flags(p)
    p.add_argument("--train-counts", metavar="C=N,...", help="training class counts")
    p.add_argument("--test-counts", metavar="C=N,...", help="held-out class counts")

    for name, help_text in (
        ("bias-audit", "name-that-dataset source classification"),
        ("benchmark", "scratch training on raw-pixel features"),
        ("transfer", "dense+softmax probe over embeddings"),
    ):
        p = sub.add_parser(name, help=help_text)
        _shared_flags(p)
        if name == "transfer":
            p.add_argument("--weighted", action="store_true", help="apply balancer class weights")

    p = sub.add_parser("report", help="re-render a saved run result")
    _shared_flags(p)
    p.add_argument("--result", type=Path, required=True, help="run result JSON")
    p.add_argument("--format", choices=["json", "markdown"], default="markdown")

    return parser


def _load_config(args: argparse.Namespace, experiment: str | None = None) -> ExperimentConfig:
    raw: dict = {}
    base_dir: Path | None = None
    if args.config:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad config JSON: {exc}") from None
        base_dir = args.config.parent
    if experiment is not None:
        raw["experiment"] = experiment
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.k is not None:
        raw["k"] = args.k
    if args.normalize is not None:
        raw["normalize"] = args.normalize
    if args.literal_alg1 is not None:
        raw["literal_alg1"] = args.literal_alg1
    if args.out is not None:
        raw["out"] = str(args.out)
    return config_from_dict(raw, base_dir=base_dir)


def _out_dir(args: argparse.Namespace, config: ExperimentConfig | None = None) -> Path:
    out = args.out or (config.out if config else None)
    if out is None:
        raise ValidationError("--out (or config key 'out') is required")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_counts(text: str) -> dict[str, int]:
    counts = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValidationError(f"bad count spec {part!r}; expected class=count")
        name, _, value = part.partition("=")
        try:
            counts[name.strip().lower()] = int(value)
        except ValueError:
            raise ValidationError(f"bad count {value!r} for class {name!r}") from None
    if not counts:
        raise ValidationError("no counts given")
    return counts


def _cmd_ingest(args: argparse.Namespace) -> int:
    specs = list(args.manifest)
    manifests: dict[Source, Path] = {}
    malignant = None
    if args.config:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
        for name, p in (raw.get("manifests") or {}).items():
            p = Path(p)
            manifests[Source.parse(name)] = p if p.is_absolute() else args.config.parent / p
        if raw.get("malignant_labels") is not None:
            malignant = frozenset(str(x).lower() for x in raw["malignant_labels"])
    for spec in specs:
        if "=" not in spec:
            raise ValidationError(f"bad --manifest {spec!r}; expected SOURCE=PATH")
        name, _, path = spec.partition("=")
        manifests[Source.parse(name)] = Path(path)
    if not manifests:
        raise ValidationError("no manifests given (use --manifest SOURCE=PATH)")

    malignant = malignant or DEFAULT_MALIGNANT_LABELS
    parsed = []
    for source, path in sorted(manifests.items(), key=lambda kv: str(kv[0])):
        with path.open("r", encoding="utf-8") as fh:
            parsed.append((source, parse_manifest(fh, source, malignant)))
    dataset = combine(parsed)

    out = _out_dir(args)
    target = out / "dataset.json"
    target.write_text(json.dumps(dataset.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    counts = ", ".join(f"{c.value}={n}" for c, n in dataset.class_counts.items())
    print(f"ingested {len(dataset)} samples ({counts}) -> {target}")
    return EXIT_OK


def _cmd_split(args: argparse.Namespace) -> int:
    if args.dataset is None:
        raise ValidationError("--dataset is required")
    dataset = CombinedDataset.from_json(json.loads(args.dataset.read_text(encoding="utf-8")))
    k = args.k if args.k is not None else 3
    seed = args.seed if args.seed is not None else 0
    splits = stratified_kfold(dataset, k, seed)
    out = _out_dir(args)
    target = out / "splits.json"
    target.write_text(splits_to_json(splits, k, seed) + "\n", encoding="utf-8")
    print(f"wrote {k} folds over {len(dataset)} samples -> {target}")
    return EXIT_OK


def _cmd_weights(args: argparse.Namespace) -> int:
    if not args.train_counts or not args.test_counts:
        raise ValidationError("--train-counts and --test-counts are required")
    train = _parse_counts(args.train_counts)
    test = _parse_counts(args.test_counts)
    literal = bool(args.literal_alg1)
    weights = balancer_weights(train, test, literal=literal)
    mode = NormalizeMode.parse(args.normalize) if args.normalize else NormalizeMode.NONE
    weights = normalize_weights(weights, mode)
    text = json.dumps(weights.to_json(), indent=2, sort_keys=True)
    if args.out is not None:
        target = _out_dir(args) / "weights.json"
        target.write_text(text + "\n", encoding="utf-8")
        print(f"wrote weights -> {target}")
    else:
        print(text)
    return EXIT_OK


def _cmd_run(args: argparse.Namespace, experiment: str) -> int:
    config = _load_config(args, experiment=experiment)
    result = run_experiment(config)
    out = _out_dir(args, config)
    json_path = write_report(result, ReportFormat.JSON, out / f"{config.experiment.value}.json")
    md_path = write_report(result, ReportFormat.MARKDOWN, out / f"{config.experiment.value}.md")
    avg = result.averaged
    print(
        f"{config.experiment.value}: jaccard={avg['jaccard_macro_percent']:.2f} "
        f"micro_f1={avg['micro']['f1']:.2f} -> {json_path}, {md_path}"
    )
    return EXIT_OK


def _cmd_transfer(args: argparse.Namespace) -> int:
    # --weighted wins; otherwise honor a weighted experiment in the config.
    experiment = "transfer_unweighted"
    if args.weighted:
        experiment = "transfer_weighted"
    elif args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad config JSON: {exc}") from None
        if str(raw.get("experiment", "")).replace("-", "_") == "transfer_weighted":
            experiment = "transfer_weighted"
    return _cmd_run(args, experiment)


def _cmd_report(args: argparse.Namespace) -> int:
    result = RunResult.from_json(json.loads(args.result.read_text(encoding="utf-8")))
    text = (
        result_to_json_str(result)
        if args.format == "json"
        else result_to_markdown(result)
    )
    if args.out is not None:
        suffix = "json" if args.format == "json" else "md"
        target = _out_dir(args) / f"report.{suffix}"
        target.write_text(text + "\n", encoding="utf-8")
        print(f"wrote report -> {target}")
    else:
        print(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "split":
            return _cmd_split(args)
        if args.command == "weights":
            return _cmd_weights(args)
        if args.command == "bias-audit":
            return _cmd_run(args, "bias_audit")
        if args.command == "benchmark":
            return _cmd_run(args, "benchmark")
        if args.command == "transfer":
            return _cmd_transfer(args)
        if args.command == "report":
            return _cmd_report(args)
        raise ValidationError(f"unknown command {args.command!r}")  # pragma: no cover
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
