from __future__ import annotations

import json

import pytest

from lesionbench.manifest import (
    CombinedDataset,
    LesionClass,
    SampleRecord,
    combine,
    synth_source,
)
from lesionbench.synth import RAW_LABEL_FOR_CLASS


def dataset_with_counts(
    benign: int, malignant: int, melanoma: int, source_name: str = "fix"
) -> CombinedDataset:
    """Single-source dataset with the requested class counts, payloads unused."""
    source = synth_source(source_name)
    records = []
    counts = {
        LesionClass.BENIGN: benign,
        LesionClass.MALIGNANT: malignant,
        LesionClass.MELANOMA: melanoma,
    }
    i = 0
    for lesion_class, n in counts.items():
        for _ in range(n):
            records.append(
                SampleRecord(
                    id=f"s{i:04d}",
                    source=source,
                    raw_label=RAW_LABEL_FOR_CLASS[lesion_class],
                    lesion_class=lesion_class,
                    payload=f"vec:{i}",
                )
            )
            i += 1
    return combine([(source, records)])


def canonical_result_bytes(report_json_text: str) -> bytes:
    """Report bytes with the nondeterministic meta block stripped."""
    obj = json.loads(report_json_text)
    obj.pop("meta", None)
    return json.dumps(obj, indent=2, sort_keys=True).encode()


@pytest.fixture
def counts_132_15_46() -> CombinedDataset:
    return dataset_with_counts(132, 15, 46)
