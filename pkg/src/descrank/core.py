"""Shared domain types: label spaces, prediction matrices, descriptions, embeddings.

All types are immutable after construction (frozen dataclasses; array fields
are stored read-only), so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

#: Sentinel for an unobserved cell in a prediction matrix.
MISSING = -1


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_ids(ids: Sequence[str], what: str) -> None:
    seen = set()
    for i in ids:
        if not isinstance(i, str) or not i:
            raise ValueError(f"{what} ids must be non-empty strings, got {i!r}")
        if i in seen:
            raise ValueError(f"duplicate {what} id {i!r}")
        seen.add(i)


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of class identifiers.

    The index of a class is its position in ``classes``; that order is part
    of the contract (files list classes in this order, ties break toward the
    lower index).
    """

    classes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < 2:
            raise ValueError(f"a label space needs at least 2 classes, got {len(self.classes)}")
        _check_ids(self.classes, "class")
        object.__setattr__(self, "_lookup", {c: i for i, c in enumerate(self.classes)})

    @property
    def k(self) -> int:
        return len(self.classes)

    def __len__(self) -> int:
        return len(self.classes)

    def index(self, cls: str) -> int:
        try:
            return self._lookup[cls]
        except KeyError:
            raise KeyError(f"unknown class {cls!r}; expected one of {list(self.classes)}") from None

    def name(self, index: int) -> str:
        return self.classes[index]

    def __contains__(self, cls: str) -> bool:
        return cls in self._lookup


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """I items by N annotators of categorical labels, with MISSING cells.

    ``cells`` holds class indices into some :class:`LabelSpace`; cells equal
    to :data:`MISSING` are unobserved. Whether the indices actually fit a
    given space is checked by :func:`validate_matrix`, not here, so that
    malformed matrices can be represented and reported on.
    """

    item_ids: tuple[str, ...]
    annotator_ids: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        object.__setattr__(self, "annotator_ids", tuple(self.annotator_ids))
        cells = np.array(self.cells, dtype=np.int64)
        if cells.ndim != 2:
            raise ValueError(f"cells must be 2-dimensional, got shape {cells.shape}")
        if len(self.item_ids) < 1 or len(self.annotator_ids) < 1:
            raise ValueError("need at least one item and one annotator")
        if cells.shape != (len(self.item_ids), len(self.annotator_ids)):
            raise ValueError(
                f"cells shape {cells.shape} does not match "
                f"{len(self.item_ids)} items x {len(self.annotator_ids)} annotators"
            )
        _check_ids(self.item_ids, "item")
        _check_ids(self.annotator_ids, "annotator")
        object.__setattr__(self, "cells", _readonly(cells))

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_annotators(self) -> int:
        return len(self.annotator_ids)

    def column(self, j: int) -> np.ndarray:
        """Labels of annotator ``j`` over all items (read-only view)."""
        return self.cells[:, j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.item_ids == other.item_ids
            and self.annotator_ids == other.annotator_ids
            and np.array_equal(self.cells, other.cells)
        )


@dataclass(frozen=True, eq=False)
class GoldLabels:
    """Known true labels for the items of a prediction matrix."""

    item_ids: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != len(self.item_ids):
            raise ValueError("labels must be one value per item id")
        if labels.shape[0] < 1:
            raise ValueError("need at least one item")
        _check_ids(self.item_ids, "item")
        if (labels < 0).any():
            raise ValueError("gold labels cannot be missing or negative")
        object.__setattr__(self, "labels", _readonly(labels))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GoldLabels):
            return NotImplemented
        return self.item_ids == other.item_ids and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class DescriptionSet:
    """One annotator: a named, complete class-to-text mapping."""

    name: str
    descriptions: Mapping[str, str]

    def __post_init__(self):
        if not self.name:
            raise ValueError("description set name must be non-empty")
        object.__setattr__(self, "descriptions", dict(self.descriptions))
        for cls, text in self.descriptions.items():
            if not text:
                raise ValueError(f"empty description for class {cls!r} in set {self.name!r}")

    def check_covers(self, space: LabelSpace) -> None:
        """Raise if this set does not describe every class exactly once."""
        have = set(self.descriptions)
        want = set(space.classes)
        if have != want:
            missing = sorted(want - have)
            extra = sorted(have - want)
            parts = []
            if missing:
                parts.append(f"missing classes {missing}")
            if extra:
                parts.append(f"unknown classes {extra}")
            raise ValueError(f"description set {self.name!r}: " + ", ".join(parts))

    def __eq__(self, other):
        if not isinstance(other, DescriptionSet):
            return NotImplemented
        return self.name == other.name and dict(self.descriptions) == dict(other.descriptions)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Identifier-keyed real vectors of one common dimension."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        vectors = np.array(self.vectors, dtype=np.float64)
        if len(self.ids) == 0:
            vectors = vectors.reshape(0, 0)
        else:
            if vectors.ndim != 2 or vectors.shape[0] != len(self.ids):
                raise ValueError("vectors must be a 2-d array with one row per id")
            if vectors.shape[1] < 1:
                raise ValueError("vector dimension must be at least 1")
            if not np.isfinite(vectors).all():
                raise ValueError("vectors must be finite")
        _check_ids(self.ids, "embedding")
        object.__setattr__(self, "vectors", _readonly(vectors))
        object.__setattr__(self, "_lookup", {i: n for n, i in enumerate(self.ids)})

    @property
    def dim(self) -> int:
        return 0 if len(self.ids) == 0 else self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, id_: str) -> bool:
        return id_ in self._lookup

    def vector(self, id_: str) -> np.ndarray:
        try:
            return self.vectors[self._lookup[id_]]
        except KeyError:
            raise KeyError(f"no embedding with id {id_!r}") from None

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.vectors, other.vectors)


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate_matrix`."""

    kind: str
    message: str
    item_id: str | None = None
    annotator_id: str | None = None


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_matrix(matrix: PredictionMatrix, space: LabelSpace) -> ValidationResult:
    """Check a matrix against a label space; violations are data, not failures.

    Reported kinds: ``cell_out_of_range`` (a non-missing cell outside
    ``0..K-1``), ``empty_item`` (an all-missing row) and ``empty_annotator``
    (an all-missing column).
    """
    violations: list[Violation] = []
    cells = matrix.cells
    bad = (cells != MISSING) & ((cells < 0) | (cells >= space.k))
    for i, j in zip(*np.nonzero(bad)):
        violations.append(
            Violation(
                kind="cell_out_of_range",
                message=(
                    f"cell ({matrix.item_ids[i]!r}, {matrix.annotator_ids[j]!r}) "
                    f"holds index {cells[i, j]} outside 0..{space.k - 1}"
                ),
                item_id=matrix.item_ids[i],
                annotator_id=matrix.annotator_ids[j],
            )
        )
    observed = cells != MISSING
    for i in np.nonzero(~observed.any(axis=1))[0]:
        violations.append(
            Violation(
                kind="empty_item",
                message=f"item {matrix.item_ids[i]!r} has no observed label",
                item_id=matrix.item_ids[i],
            )
        )
    for j in np.nonzero(~observed.any(axis=0))[0]:
        violations.append(
            Violation(
                kind="empty_annotator",
                message=f"annotator {matrix.annotator_ids[j]!r} has no observed label",
                annotator_id=matrix.annotator_ids[j],
            )
        )
    return ValidationResult(tuple(violations))
