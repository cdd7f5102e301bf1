"""Baselines and evaluation: majority vote, Cohen's kappa, macro-F1, Spearman rho.

All functions are pure and deterministic. The two statistics that can
degenerate (kappa when chance agreement is 1, Spearman on a constant vector)
return a flagged value instead of NaN so batch reports stay total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import MISSING, GoldLabels, LabelSpace, PredictionMatrix
from .errors import DimensionMismatchError, NeedTwoAnnotatorsError, NoOverlapError
from .mace import MaceModel, rank_by_theta


class KappaResult(NamedTuple):
    value: float
    degenerate: bool = False


class SpearmanResult(NamedTuple):
    value: float
    degenerate: bool = False


def majority_vote(matrix: PredictionMatrix) -> np.ndarray:
    """Per item, the modal label over observed cells; ties to the lowest index."""
    n_items = matrix.n_items
    k = int(matrix.cells.max()) + 1
    out = np.empty(n_items, dtype=np.int64)
    for i in range(n_items):
        row = matrix.cells[i]
        votes = row[row != MISSING]
        out[i] = int(np.argmax(np.bincount(votes, minlength=k)))
    return out


def cohen_kappa(a, b) -> KappaResult:
    """Chance-corrected agreement of two label columns.

    Only items observed in both columns count. When chance agreement is
    exactly 1 (both columns constant and equal) the statistic is undefined;
    by convention the result is then 1.0 if the columns agree everywhere and
    0.0 otherwise, with the degenerate flag set.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"column lengths differ: {a.shape[0]} vs {b.shape[0]}")
    shared = (a != MISSING) & (b != MISSING)
    n = int(shared.sum())
    if n == 0:
        raise NoOverlapError("no item is observed in both columns")
    a = a[shared]
    b = b[shared]
    p_obs = float(np.mean(a == b))
    width = int(max(a.max(), b.max())) + 1
    marg_a = np.bincount(a, minlength=width) / n
    marg_b = np.bincount(b, minlength=width) / n
    p_exp = float(np.dot(marg_a, marg_b))
    if p_exp >= 1.0:
        return KappaResult(1.0 if p_obs == 1.0 else 0.0, degenerate=True)
    return KappaResult((p_obs - p_exp) / (1.0 - p_exp))


def kappa_scores(matrix: PredictionMatrix) -> np.ndarray:
    """Per annotator, the mean kappa against every other annotator."""
    n = matrix.n_annotators
    if n < 2:
        raise NeedTwoAnnotatorsError("kappa scores need at least two annotators")
    pair = np.zeros((n, n))
    for j in range(n):
        for j2 in range(j + 1, n):
            value = cohen_kappa(matrix.cells[:, j], matrix.cells[:, j2]).value
            pair[j, j2] = pair[j2, j] = value
    return (pair.sum(axis=1)) / (n - 1)


def macro_f1(predicted, gold, k: int) -> float:
    """Unweighted mean over all k classes of per-class F1.

    A class with no predicted and no gold instances contributes 0 and still
    counts in the average. Positions where ``predicted`` is missing are
    skipped together with their gold labels.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    gold_labels = gold.labels if isinstance(gold, GoldLabels) else np.asarray(gold, dtype=np.int64)
    if predicted.shape != gold_labels.shape:
        raise DimensionMismatchError(
            f"predicted and gold lengths differ: {predicted.shape[0]} vs {gold_labels.shape[0]}"
        )
    keep = predicted != MISSING
    predicted = predicted[keep]
    gold_labels = gold_labels[keep]
    total = 0.0
    for c in range(k):
        tp = int(np.sum((predicted == c) & (gold_labels == c)))
        fp = int(np.sum((predicted == c) & (gold_labels != c)))
        fn = int(np.sum((predicted != c) & (gold_labels == c)))
        if tp == 0:
            continue
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        total += 2.0 * precision * recall / (precision + recall)
    return total / k


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0], dtype=np.float64)
    sorted_x = x[order]
    i = 0
    n = x.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x, y) -> SpearmanResult:
    """Pearson correlation of average ranks; ties share the mean of their range.

    A constant vector has no rank variance; the result is then 0.0 with the
    degenerate flag set.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"vector lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("need at least two observations")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = float(np.dot(dx, dx))
    vy = float(np.dot(dy, dy))
    if vx == 0.0 or vy == 0.0:
        return SpearmanResult(0.0, degenerate=True)
    rho = float(np.dot(dx, dy) / np.sqrt(vx * vy))
    return SpearmanResult(min(1.0, max(-1.0, rho)))


@dataclass(frozen=True)
class AnnotatorRow:
    annotator_id: str
    theta: float
    kappa_mean: float
    macro_f1: float | None = None


@dataclass(frozen=True)
class RankingReport:
    """Per-annotator scores, ordered by descending competence.

    The rank correlations are present only when gold labels were given.
    """

    rows: tuple[AnnotatorRow, ...]
    rho_theta_f1: float | None = None
    rho_kappa_f1: float | None = None


def ranking_report(
    matrix: PredictionMatrix,
    model: MaceModel,
    gold: GoldLabels | None = None,
    space: LabelSpace | None = None,
) -> RankingReport:
    """Assemble competence, mean kappa, and (with gold) macro-F1 per annotator.

    With gold labels the report also carries the Spearman correlation of the
    competence ranking and of the kappa ranking against the true macro-F1,
    which is how well each unsupervised score predicts actual quality.
    ``space`` is only needed with gold, to size the confusion counts.
    """
    if model.n_annotators != matrix.n_annotators:
        raise ValueError("model was not fitted on this matrix (annotator count differs)")
    n = matrix.n_annotators
    if n >= 2:
        kappas = kappa_scores(matrix)
    else:
        kappas = np.array([float("nan")])

    f1s = None
    if gold is not None:
        if space is None:
            raise ValueError("a label space is required to compute macro-F1 against gold")
        if gold.item_ids != matrix.item_ids:
            raise ValueError("gold item ids do not match the matrix")
        f1s = np.array(
            [macro_f1(matrix.cells[:, j], gold, space.k) for j in range(n)]
        )

    order = rank_by_theta(model, matrix.annotator_ids)
    index = {aid: j for j, aid in enumerate(matrix.annotator_ids)}
    rows = []
    for aid, theta in order:
        j = index[aid]
        rows.append(
            AnnotatorRow(
                annotator_id=aid,
                theta=theta,
                kappa_mean=float(kappas[j]),
                macro_f1=None if f1s is None else float(f1s[j]),
            )
        )

    rho_theta = rho_kappa = None
    if f1s is not None and n >= 2:
        rho_theta = spearman_rho(np.asarray(model.theta), f1s).value
        rho_kappa = spearman_rho(kappas, f1s).value
    return RankingReport(rows=tuple(rows), rho_theta_f1=rho_theta, rho_kappa_f1=rho_kappa)
