"""Manifest ingestion: per-source CSVs in, one combined dataset out.

A manifest is a UTF-8 CSV with header ``id,raw_label,payload``. Raw labels
are grouped into the three lesion classes (benign / malignant / melanoma);
sources are merged by prefixing each local id with its source name so ids
stay globally unique.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

MANIFEST_HEADER = ("id", "raw_label", "payload")

# Skin-cancer labels that map to the malignant class when grouping; callers
# may extend or replace the set via config.
DEFAULT_MALIGNANT_LABELS = frozenset(
    {
        "basal cell carcinoma",
        "bcc",
        "squamous cell carcinoma",
        "scc",
        "actinic keratosis",
        "akiec",
        "ak",
    }
)


class LesionClass(Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"
    MELANOMA = "melanoma"

    def __str__(self) -> str:
        return self.value


# Fixed class-axis order used everywhere (reports, weight vectors, confusion
# matrices).
LESION_CLASS_ORDER: tuple[LesionClass, ...] = (
    LesionClass.BENIGN,
    LesionClass.MALIGNANT,
    LesionClass.MELANOMA,
)


class SourceKind(Enum):
    ISIC2019 = "isic2019"
    PH2 = "ph2"
    SEVENPOINT = "sevenpoint"
    SYNTH = "synth"


@dataclass(frozen=True, order=True)
class Source:
    """A dataset source; synthetic sources carry a distinguishing name."""

    kind: SourceKind
    synth_name: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is SourceKind.SYNTH) != (self.synth_name is not None):
            raise ValidationError("synth sources require a name; real sources must not carry one")

    def __str__(self) -> str:
        if self.kind is SourceKind.SYNTH:
            return f"synth:{self.synth_name}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Source":
        text = text.strip().lower()
        if text.startswith("synth:"):
            name = text[len("synth:"):]
            if not name:
                raise ValidationError("synthetic source name is empty")
            return cls(SourceKind.SYNTH, name)
        try:
            return cls(SourceKind(text))
        except ValueError:
            raise ValidationError(
                f"unknown source {text!r} (expected isic2019, ph2, sevenpoint, or synth:<name>)"
            ) from None


ISIC2019 = Source(SourceKind.ISIC2019)
PH2 = Source(SourceKind.PH2)
SEVENPOINT = Source(SourceKind.SEVENPOINT)


def synth_source(name: str) -> Source:
    return Source(SourceKind.SYNTH, name)


@dataclass(frozen=True)
class SampleRecord:
    id: str
    source: Source
    raw_label: str
    lesion_class: LesionClass
    payload: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source": str(self.source),
            "raw_label": self.raw_label,
            "lesion_class": self.lesion_class.value,
            "payload": self.payload,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleRecord":
        return cls(
            id=obj["id"],
            source=Source.parse(obj["source"]),
            raw_label=obj["raw_label"],
            lesion_class=LesionClass(obj["lesion_class"]),
            payload=obj["payload"],
        )


def group_label(
    raw_label: str, malignant_labels: frozenset[str] | set[str] = DEFAULT_MALIGNANT_LABELS
) -> LesionClass:
    """Map a lowercase raw label onto one of the three lesion classes.

    Melanoma wins on substring match (unless negated by "non-melanoma");
    malignant requires exact membership in the malignant label set;
    everything else is benign.
    """
    if not raw_label:
        raise ValidationError("raw label is empty")
    if "melanoma" in raw_label and "non-melanoma" not in raw_label:
        return LesionClass.MELANOMA
    if raw_label in malignant_labels:
        return LesionClass.MALIGNANT
    return LesionClass.BENIGN


def parse_manifest(
    text: str | io.TextIOBase,
    source: Source,
    malignant_labels: frozenset[str] | set[str] = DEFAULT_MALIGNANT_LABELS,
) -> list[SampleRecord]:
    """Parse one manifest CSV into records for ``source``.

    Raw labels are whitespace-trimmed and lowercased before grouping.
    Raises :class:`ParseError` with the 1-based line number on structural
    problems, :class:`ValidationError` on empty fields or duplicate ids.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)

    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("manifest is empty; expected header id,raw_label,payload") from None
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ParseError(f"line 1: bad header {header!r}; expected id,raw_label,payload")

    records: list[SampleRecord] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"line {line}: expected 3 columns, got {len(row)}")
        sample_id = row[0].strip()
        raw_label = row[1].strip().lower()
        payload = row[2].strip()
        if not sample_id:
            raise ValidationError(f"line {line}: empty id")
        if not raw_label:
            raise ValidationError(f"line {line}: empty raw_label")
        if sample_id in seen:
            raise ValidationError(f"line {line}: duplicate id {sample_id!r}")
        seen.add(sample_id)
        records.append(
            SampleRecord(
                id=sample_id,
                source=source,
                raw_label=raw_label,
                lesion_class=group_label(raw_label, malignant_labels),
                payload=payload,
            )
        )
    return records


@dataclass(frozen=True)
class CombinedDataset:
    """Merged multi-source collection with cached per-class/per-source counts."""

    samples: tuple[SampleRecord, ...]
    class_counts: dict[LesionClass, int] = field(compare=False)
    source_counts: dict[Source, int] = field(compare=False)

    def __len__(self) -> int:
        return len(self.samples)

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def recount(self) -> tuple[dict[LesionClass, int], dict[Source, int]]:
        """Recompute both count maps from the samples (invariant check hook)."""
        by_class = Counter(s.lesion_class for s in self.samples)
        by_source = Counter(s.source for s in self.samples)
        return (
            {c: by_class.get(c, 0) for c in LESION_CLASS_ORDER},
            dict(by_source),
        )

    def to_json(self) -> dict:
        return {
            "format": "combined-dataset-v1",
            "samples": [s.to_json() for s in self.samples],
            "class_counts": {c.value: n for c, n in self.class_counts.items()},
            "source_counts": {str(s): n for s, n in self.source_counts.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CombinedDataset":
        if obj.get("format") != "combined-dataset-v1":
            raise ParseError(f"unexpected dataset format {obj.get('format')!r}")
        samples = [SampleRecord.from_json(s) for s in obj["samples"]]
        dataset = _build(samples)
        stored = {LesionClass(k): v for k, v in obj["class_counts"].items()}
        if stored != dataset.class_counts:
            raise ValidationError("stored class_counts disagree with samples")
        return dataset


def _build(samples: Sequence[SampleRecord]) -> CombinedDataset:
    by_class = Counter(s.lesion_class for s in samples)
    by_source = Counter(s.source for s in samples)
    return CombinedDataset(
        samples=tuple(samples),
        class_counts={c: by_class.get(c, 0) for c in LESION_CLASS_ORDER},
        source_counts=dict(by_source),
    )


def combine(manifests: Iterable[tuple[Source, Sequence[SampleRecord]]]) -> CombinedDataset:
    """Merge per-source record lists, prefixing ids with the source name.

    Input order is preserved. Duplicate prefixed ids (i.e. the same source
    listed twice with overlapping local ids) raise :class:`ValidationError`.
    """
    manifests = list(manifests)
    if not manifests:
        raise ValidationError("combine requires at least one manifest")

    merged: list[SampleRecord] = []
    seen: set[str] = set()
    for source, records in manifests:
        for record in records:
            prefixed = prefixed_id(source, record.id)
            if prefixed in seen:
                raise ValidationError(f"duplicate id {prefixed!r} across manifests")
            seen.add(prefixed)
            merged.append(
                SampleRecord(
                    id=prefixed,
                    source=source,
                    raw_label=record.raw_label,
                    lesion_class=record.lesion_class,
                    payload=record.payload,
                )
            )
    return _build(merged)


def prefixed_id(source: Source, local_id: str) -> str:
    """Globally unique id for a sample: ``<source>/<local id>``."""
    return f"{source}/{local_id}"
