"""Sampler for the generative story: synthetic gold, spam indicators and labels.

Bundles produced here carry the full latent state (true competences, true
emission rows, per-cell spam indicators), so tests can check conditional
structure directly instead of only marginal rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MISSING, GoldLabels, LabelSpace, PredictionMatrix
from .errors import InvalidParametersError

_MAX_REPAIR_PASSES = 10_000


@dataclass(frozen=True, eq=False)
class SyntheticBundle:
    """One synthetic dataset plus the latent state that generated it.

    ``spam_draws`` holds, per observed cell, 0 where the annotator copied
    gold and 1 where it emitted from its spam distribution; missing cells
    hold :data:`MISSING`.
    """

    gold: GoldLabels
    matrix: PredictionMatrix
    theta_true: np.ndarray
    xi_true: np.ndarray
    spam_draws: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("theta_true", "xi_true"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        draws = np.asarray(self.spam_draws, dtype=np.int64)
        draws.setflags(write=False)
        object.__setattr__(self, "spam_draws", draws)


def _check_parameters(theta, xi, k: int):
    theta = np.asarray(theta, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] < 1:
        raise InvalidParametersError("theta must be a non-empty vector")
    if ((theta < 0.0) | (theta > 1.0)).any():
        raise InvalidParametersError("theta values must lie in [0, 1]")
    if xi.shape != (theta.shape[0], k):
        raise InvalidParametersError(
            f"xi must have shape ({theta.shape[0]}, {k}), got {xi.shape}"
        )
    if (xi < 0.0).any() or not np.allclose(xi.sum(axis=1), 1.0, atol=1e-9):
        raise InvalidParametersError("each xi row must be a probability distribution")
    return theta, xi


def _draw_mask(rng, n_items: int, n_ann: int, missing_rate: float) -> np.ndarray:
    """Missingness mask (True = missing) with no all-missing row or column.

    Offending rows and columns are redrawn rather than rejecting the whole
    mask, which keeps the expected number of draws bounded even at high
    missing rates.
    """
    mask = rng.random((n_items, n_ann)) < missing_rate
    for _ in range(_MAX_REPAIR_PASSES):
        dirty = False
        for i in np.nonzero(mask.all(axis=1))[0]:
            dirty = True
            row = rng.random(n_ann) < missing_rate
            while row.all():
                row = rng.random(n_ann) < missing_rate
            mask[i] = row
        for j in np.nonzero(mask.all(axis=0))[0]:
            dirty = True
            col = rng.random(n_items) < missing_rate
            while col.all():
                col = rng.random(n_items) < missing_rate
            mask[:, j] = col
        if not dirty and not mask.all(axis=1).any() and not mask.all(axis=0).any():
            return mask
    raise RuntimeError("could not repair the missingness mask; missing_rate too extreme")


def sample(
    n_items: int,
    space: LabelSpace,
    theta_true,
    xi_true,
    missing_rate: float = 0.0,
    seed: int = 0,
) -> SyntheticBundle:
    """Draw a synthetic bundle; deterministic given identical arguments.

    Gold labels are uniform over the label space. Per observed cell, the
    annotator spams with probability ``1 - theta_j``; spam labels come from
    its emission row, otherwise the cell copies gold. Cells go missing
    independently at ``missing_rate``, with empty rows and columns repaired
    by redraw. Draw order (gold, mask, spam indicators, spam labels) is fixed.
    """
    if n_items < 1:
        raise InvalidParametersError("need at least one item")
    if not (0.0 <= missing_rate < 1.0):
        raise InvalidParametersError("missing_rate must lie in [0, 1)")
    k = space.k
    theta, xi = _check_parameters(theta_true, xi_true, k)
    n_ann = theta.shape[0]

    rng = np.random.default_rng(seed)
    gold = rng.integers(0, k, size=n_items)
    if missing_rate > 0.0:
        mask = _draw_mask(rng, n_items, n_ann, missing_rate)
    else:
        mask = np.zeros((n_items, n_ann), dtype=bool)

    spam = (rng.random((n_items, n_ann)) < (1.0 - theta)[None, :]).astype(np.int64)
    cum = np.cumsum(xi, axis=1)
    cum[:, -1] = 1.0
    u = rng.random((n_items, n_ann))
    spam_labels = np.empty((n_items, n_ann), dtype=np.int64)
    for j in range(n_ann):
        spam_labels[:, j] = np.searchsorted(cum[j], u[:, j], side="right")
    spam_labels = np.minimum(spam_labels, k - 1)

    cells = np.where(spam == 1, spam_labels, gold[:, None])
    cells = np.where(mask, MISSING, cells)
    spam_draws = np.where(mask, MISSING, spam)

    item_ids = tuple(f"i{n:05d}" for n in range(n_items))
    annotator_ids = tuple(f"a{j:02d}" for j in range(n_ann))
    return SyntheticBundle(
        gold=GoldLabels(item_ids=item_ids, labels=gold),
        matrix=PredictionMatrix(item_ids=item_ids, annotator_ids=annotator_ids, cells=cells),
        theta_true=theta,
        xi_true=xi,
        spam_draws=spam_draws,
        seed=seed,
    )
