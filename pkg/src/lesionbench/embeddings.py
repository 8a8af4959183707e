"""Embedding/feature tables in the emb-jsonl interchange format.

File layout: UTF-8 JSON Lines, a header line first

    {"format": "emb-jsonl", "dim": <d>, "backbone": "<name>"}

then one line per sample

    {"id": "<local id>", "source": "<source>", "raw_label": "<label>", "vec": [...]}

Tables are keyed by the combined-dataset id, i.e. "<source>/<local id>".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ParseError, ValidationError
from .manifest import Source, prefixed_id

FORMAT_NAME = "emb-jsonl"


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    backbone: str
    vectors: dict[str, np.ndarray]  # prefixed id -> float64 vector of length dim

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, sample_id: str) -> np.ndarray:
        try:
            return self.vectors[sample_id]
        except KeyError:
            raise ValidationError(f"no embedding for id {sample_id!r}") from None

    def matrix(self, ids: Iterable[str]) -> np.ndarray:
        """Row per id, in the given order; missing ids raise with the id named."""
        return np.stack([self.get(i) for i in ids])


def load_embeddings(path: str | Path) -> EmbeddingTable:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ParseError(f"{path}: empty embedding file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: bad header line: {exc}") from None
        if header.get("format") != FORMAT_NAME:
            raise ParseError(f"{path}: header format is {header.get('format')!r}, expected {FORMAT_NAME!r}")
        dim = header.get("dim")
        backbone = header.get("backbone", "")
        if not isinstance(dim, int) or dim < 1:
            raise ParseError(f"{path}: header dim must be a positive integer, got {dim!r}")

        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: bad JSON: {exc}") from None
            try:
                source = Source.parse(row["source"])
                key = prefixed_id(source, row["id"])
                vec = np.asarray(row["vec"], dtype=np.float64)
            except (KeyError, TypeError) as exc:
                raise ParseError(f"{path}: line {lineno}: missing field: {exc}") from None
            if vec.ndim != 1 or vec.shape[0] != dim:
                raise ValidationError(
                    f"{path}: line {lineno}: vector length {vec.shape} differs from dim={dim}"
                )
            if not np.isfinite(vec).all():
                raise ValidationError(f"{path}: line {lineno}: non-finite vector entries")
            if key in vectors:
                raise ValidationError(f"{path}: line {lineno}: duplicate id {key!r}")
            vectors[key] = vec
    return EmbeddingTable(dim=dim, backbone=backbone, vectors=vectors)


def write_embeddings(
    path: str | Path,
    backbone: str,
    dim: int,
    rows: Iterable[tuple[Source, str, str, np.ndarray]],
) -> None:
    """Write (source, local id, raw label, vector) rows in the file format."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": FORMAT_NAME, "dim": dim, "backbone": backbone}) + "\n")
        for source, local_id, raw_label, vec in rows:
            fh.write(
                json.dumps(
                    {
                        "id": local_id,
                        "source": str(source),
                        "raw_label": raw_label,
                        "vec": [float(v) for v in vec],
                    }
                )
                + "\n"
            )
