"""File formats and the optional embedding-service client.

Formats are deliberately plain text: predictions and gold labels are CSV
with class identifier texts in the cells (empty cell = missing), embeddings
are JSON lines. Every writer's output is readable by the matching reader,
bit-exactly for floating point (JSON round-trips doubles via repr).
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .core import MISSING, EmbeddingSet, GoldLabels, LabelSpace, PredictionMatrix
from .errors import DimensionMismatchError, EmbeddingServiceError, ParseError


# -- prediction matrices ----------------------------------------------------

def write_predictions(path, matrix: PredictionMatrix, space: LabelSpace) -> None:
    """CSV with header ``item_id,<annotator ids...>``; cells are class texts."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", *matrix.annotator_ids])
        for i, item_id in enumerate(matrix.item_ids):
            row = [item_id]
            for value in matrix.cells[i]:
                row.append("" if value == MISSING else space.name(int(value)))
            writer.writerow(row)


def read_predictions(path, space: LabelSpace) -> PredictionMatrix:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty predictions file") from None
        if not header or header[0] != "item_id":
            raise ParseError(f"{path}: first header column must be 'item_id'", row=0)
        annotator_ids = header[1:]
        if not annotator_ids:
            raise ParseError(f"{path}: no annotator columns", row=0)
        if len(set(annotator_ids)) != len(annotator_ids):
            raise ParseError(f"{path}: duplicate annotator ids in header", row=0)

        item_ids: list[str] = []
        seen: set[str] = set()
        rows: list[list[int]] = []
        for n, record in enumerate(reader, start=1):
            if len(record) != len(annotator_ids) + 1:
                raise ParseError(
                    f"{path}: expected {len(annotator_ids) + 1} fields, got {len(record)}", row=n
                )
            item_id = record[0]
            if item_id in seen:
                raise ParseError(f"{path}: duplicate item id {item_id!r}", row=n)
            seen.add(item_id)
            item_ids.append(item_id)
            cells = []
            for aid, text in zip(annotator_ids, record[1:]):
                if text == "":
                    cells.append(MISSING)
                elif text in space:
                    cells.append(space.index(text))
                else:
                    raise ParseError(f"{path}: unknown class {text!r}", row=n, column=aid)
            rows.append(cells)
    if not item_ids:
        raise ParseError(f"{path}: no items")
    try:
        return PredictionMatrix(
            item_ids=tuple(item_ids), annotator_ids=tuple(annotator_ids), cells=np.array(rows)
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# -- gold labels ------------------------------------------------------------

def write_gold(path, gold: GoldLabels, space: LabelSpace) -> None:
    """CSV with header ``item_id,label``; labels are class texts."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "label"])
        for item_id, value in zip(gold.item_ids, gold.labels):
            writer.writerow([item_id, space.name(int(value))])


def read_gold(path, space: LabelSpace) -> GoldLabels:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty gold file") from None
        if header[:2] != ["item_id", "label"]:
            raise ParseError(f"{path}: header must be 'item_id,label'", row=0)
        item_ids: list[str] = []
        labels: list[int] = []
        seen: set[str] = set()
        for n, record in enumerate(reader, start=1):
            if len(record) != 2:
                raise ParseError(f"{path}: expected 2 fields, got {len(record)}", row=n)
            item_id, text = record
            if item_id in seen:
                raise ParseError(f"{path}: duplicate item id {item_id!r}", row=n)
            seen.add(item_id)
            if text not in space:
                raise ParseError(f"{path}: unknown class {text!r}", row=n, column="label")
            item_ids.append(item_id)
            labels.append(space.index(text))
    if not item_ids:
        raise ParseError(f"{path}: no items")
    return GoldLabels(item_ids=tuple(item_ids), labels=np.array(labels))


# -- embeddings -------------------------------------------------------------

def write_embeddings(path, embeddings: EmbeddingSet) -> None:
    """One JSON object per line: ``{"id": ..., "vector": [...]}``."""
    with open(path, "w", encoding="utf-8") as fh:
        for id_, vector in zip(embeddings.ids, embeddings.vectors):
            fh.write(json.dumps({"id": id_, "vector": vector.tolist()}) + "\n")


def read_embeddings(path) -> EmbeddingSet:
    ids: list[str] = []
    vectors: list[list[float]] = []
    seen: set[str] = set()
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON ({exc.msg})", row=n) from exc
            if not isinstance(record, dict) or "id" not in record or "vector" not in record:
                raise ParseError(f"{path}: each line needs 'id' and 'vector'", row=n)
            id_ = record["id"]
            if not isinstance(id_, str) or not id_:
                raise ParseError(f"{path}: id must be a non-empty string", row=n)
            if id_ in seen:
                raise ParseError(f"{path}: duplicate id {id_!r}", row=n)
            seen.add(id_)
            vector = record["vector"]
            if not isinstance(vector, list) or not vector:
                raise ParseError(f"{path}: vector must be a non-empty array", row=n)
            if not all(isinstance(v, (int, float)) and np.isfinite(v) for v in vector):
                raise ParseError(f"{path}: vector values must be finite numbers", row=n)
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise DimensionMismatchError(
                    f"{path}: line {n} has dimension {len(vector)}, expected {dim}"
                )
            ids.append(id_)
            vectors.append(vector)
    if not ids:
        return EmbeddingSet(ids=(), vectors=np.zeros((0, 0)))
    return EmbeddingSet(ids=tuple(ids), vectors=np.array(vectors, dtype=np.float64))


# -- embedding service ------------------------------------------------------

def text_digest(text: str) -> str:
    """Content digest keying the local embedding cache."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_cache(cache_path: Path) -> dict[str, list[float]]:
    cache: dict[str, list[float]] = {}
    if cache_path.exists():
        with open(cache_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                cache[record["digest"]] = record["vector"]
    return cache


def fetch_embeddings(
    endpoint: str,
    texts: Sequence[str],
    ids: Sequence[str] | None = None,
    cache_path=None,
    timeout: float = 30.0,
) -> EmbeddingSet:
    """POST texts to ``<endpoint>/embed`` and return their vectors in order.

    The request body is ``{"texts": [...]}`` and the expected response
    ``{"vectors": [[...], ...]}``, aligned with the request. With a
    ``cache_path``, vectors are memoized in a JSONL file keyed by a sha256
    digest of each text, and only cache misses hit the service; an empty
    text list sends no request at all. ``ids`` defaults to the texts
    themselves and must be unique.
    """
    texts = list(texts)
    ids = list(ids) if ids is not None else list(texts)
    if len(ids) != len(texts):
        raise ValueError(f"got {len(ids)} ids for {len(texts)} texts")
    if not texts:
        return EmbeddingSet(ids=(), vectors=np.zeros((0, 0)))

    cache: dict[str, list[float]] = {}
    if cache_path is not None:
        cache_path = Path(cache_path)
        cache = _load_cache(cache_path)

    digests = [text_digest(t) for t in texts]
    missing: list[str] = []
    missing_digests: list[str] = []
    for text, digest in zip(texts, digests):
        if digest not in cache and digest not in missing_digests:
            missing.append(text)
            missing_digests.append(digest)

    if missing:
        url = endpoint.rstrip("/") + "/embed"
        try:
            response = requests.post(url, json={"texts": missing}, timeout=timeout)
            response.raise_for_status()
            payload = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise EmbeddingServiceError(f"embedding service failed: {exc}") from exc
        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(missing):
            raise EmbeddingServiceError(
                f"malformed response: expected {len(missing)} vectors"
            )
        for digest, vector in zip(missing_digests, vectors):
            if not isinstance(vector, list) or not vector:
                raise EmbeddingServiceError("malformed response: bad vector")
            cache[digest] = [float(v) for v in vector]
        if cache_path is not None:
            with open(cache_path, "a", encoding="utf-8") as fh:
                for digest, vector in zip(missing_digests, vectors):
                    fh.write(json.dumps({"digest": digest, "vector": cache[digest]}) + "\n")

    try:
        matrix = np.array([cache[d] for d in digests], dtype=np.float64)
    except ValueError as exc:
        raise EmbeddingServiceError(f"inconsistent vector dimensions: {exc}") from exc
    if matrix.ndim != 2:
        raise EmbeddingServiceError("inconsistent vector dimensions across texts")
    return EmbeddingSet(ids=tuple(ids), vectors=matrix)
