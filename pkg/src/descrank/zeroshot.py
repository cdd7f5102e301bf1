"""Similarity-based classification head over precomputed embeddings.

Items and label descriptions are embedded elsewhere; here we only score
cosine similarity between item vectors and per-class description vectors,
turn scores into a probability distribution, and take the argmax as the
hard prediction. Hard labels are what downstream aggregation consumes;
probabilities are kept for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DescriptionSet, EmbeddingSet, LabelSpace, PredictionMatrix
from .errors import (
    BadPatternError,
    DimensionMismatchError,
    InvalidScoreError,
    MissingEmbeddingError,
    ZeroVectorError,
)

PLACEHOLDER = "{}"


@dataclass(frozen=True, eq=False)
class SimilarityRow:
    """Per-class scores, their softmax, and the argmax prediction for one item."""

    scores: np.ndarray
    probabilities: np.ndarray
    predicted: int


@dataclass(frozen=True)
class PatternGrid:
    """Sentence templates crossed with named word substitutions.

    Each pattern must contain the placeholder ``{}`` exactly once; each
    variant is a complete class-to-word mapping (a :class:`DescriptionSet`).
    """

    patterns: tuple[str, ...]
    variants: tuple[DescriptionSet, ...]

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "variants", tuple(self.variants))
        if not self.patterns:
            raise ValueError("pattern grid needs at least one pattern")
        if not self.variants:
            raise ValueError("pattern grid needs at least one variant")
        _check_patterns(self.patterns)


def _check_patterns(patterns: Sequence[str]) -> None:
    for p in patterns:
        n = p.count(PLACEHOLDER)
        if n != 1:
            raise BadPatternError(f"pattern {p!r} contains {n} placeholders, expected exactly 1")


def cosine(u, v) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionMismatchError(f"vector dimensions differ: {u.shape[0]} vs {v.shape[0]}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def softmax_predict(scores, temperature: float = 1.0) -> SimilarityRow:
    """Softmax over scores at the given temperature, plus the argmax prediction.

    Computed with max subtraction for stability. Ties on the maximum score
    resolve to the lowest class index, so the prediction does not depend on
    the temperature.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.shape[0] < 2:
        raise ValueError(f"need at least 2 scores, got {s.shape[0]}")
    if not np.isfinite(s).all():
        raise InvalidScoreError("scores must be finite")
    if not (temperature > 0.0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = s / temperature
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()
    predicted = int(np.argmax(s))
    s = s.copy()
    s.setflags(write=False)
    p.setflags(write=False)
    return SimilarityRow(scores=s, probabilities=p, predicted=predicted)


@dataclass(frozen=True, eq=False)
class PredictionResult:
    """Hard predictions plus the diagnostic score tensors behind them.

    ``similarities`` and ``probabilities`` are (items, sets, classes) arrays.
    """

    matrix: PredictionMatrix
    similarities: np.ndarray
    probabilities: np.ndarray


def embedding_key(set_name: str, class_name: str) -> str:
    """Key under which a description embedding is stored: ``setname/classname``."""
    return f"{set_name}/{class_name}"


def predict_matrix(
    items: EmbeddingSet,
    sets: Sequence[DescriptionSet],
    desc_embeddings: EmbeddingSet,
    space: LabelSpace,
    temperature: float = 1.0,
) -> PredictionResult:
    """Predict one label per (item, description set) pair.

    Column j of the returned matrix is the argmax cosine prediction of set j
    on every item; no cell is ever missing. Description embeddings are looked
    up under ``setname/classname`` keys and must match the item dimension.
    """
    if len(items) == 0:
        raise ValueError("need at least one item embedding")
    if not sets:
        raise ValueError("need at least one description set")
    n_items, n_sets, k = len(items), len(sets), space.k

    desc = np.empty((n_sets * k, items.dim), dtype=np.float64)
    for j, ds in enumerate(sets):
        ds.check_covers(space)
        for c, cls in enumerate(space.classes):
            key = embedding_key(ds.name, cls)
            if key not in desc_embeddings:
                raise MissingEmbeddingError(key)
            vec = desc_embeddings.vector(key)
            if vec.shape[0] != items.dim:
                raise DimensionMismatchError(
                    f"description embedding {key!r} has dimension {vec.shape[0]}, "
                    f"items have {items.dim}"
                )
            desc[j * k + c] = vec

    item_norms = np.linalg.norm(items.vectors, axis=1)
    if (item_norms == 0.0).any():
        bad = items.ids[int(np.argmin(item_norms))]
        raise ZeroVectorError(f"item embedding {bad!r} has zero norm")
    desc_norms = np.linalg.norm(desc, axis=1)
    if (desc_norms == 0.0).any():
        flat = int(np.argmin(desc_norms))
        key = embedding_key(sets[flat // k].name, space.classes[flat % k])
        raise ZeroVectorError(f"description embedding {key!r} has zero norm")

    sims = (items.vectors @ desc.T) / np.outer(item_norms, desc_norms)
    sims = np.clip(sims, -1.0, 1.0).reshape(n_items, n_sets, k)

    if not (temperature > 0.0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = sims / temperature
    z = z - z.max(axis=2, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=2, keepdims=True)

    cells = np.argmax(sims, axis=2)
    matrix = PredictionMatrix(
        item_ids=items.ids,
        annotator_ids=tuple(ds.name for ds in sets),
        cells=cells,
    )
    sims.setflags(write=False)
    probs.setflags(write=False)
    return PredictionResult(matrix=matrix, similarities=sims, probabilities=probs)


def expand_patterns(grid: PatternGrid, space: LabelSpace) -> list[DescriptionSet]:
    """Cross every pattern with every variant into concrete description sets.

    Output is row-major (patterns outer, variants inner); the set for pattern
    index p and variant v is named ``p<p>×<v>``.
    """
    _check_patterns(grid.patterns)
    expanded = []
    for p_idx, pattern in enumerate(grid.patterns):
        for variant in grid.variants:
            variant.check_covers(space)
            texts = {
                cls: pattern.replace(PLACEHOLDER, variant.descriptions[cls])
                for cls in space.classes
            }
            expanded.append(DescriptionSet(name=f"p{p_idx}×{variant.name}", descriptions=texts))
    return expanded
