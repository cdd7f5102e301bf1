"""Pure-numpy EM kernels: the fallback path when numba is unavailable or disabled.

Both kernel modules implement the same two functions over a dense labels
array ``y`` of shape (items, annotators) with -1 marking missing cells.
Competence values must be strictly inside (0, 1) and emission rows strictly
positive; the smoothed M-step guarantees both.
"""

from __future__ import annotations

import numpy as np


def e_step(y: np.ndarray, theta: np.ndarray, xi: np.ndarray, k: int):
    """One expectation step.

    Returns ``(r, q, ll)``: the per-item posterior over gold labels (items, k),
    the per-cell probability that the annotator copied gold rather than
    spammed (items, annotators; zero on missing cells), and the marginal
    log-likelihood under a uniform gold prior, accumulated with log-sum-exp.

    The per-class score is assembled as a shared base (every annotator
    spamming) plus, for the observed label only, the log-ratio of the
    copy-or-spam cell likelihood to the spam term. That keeps the log count
    at O(items * annotators) instead of O(items * annotators * k).
    """
    n_items, n_ann = y.shape
    obs = y >= 0
    y_safe = np.where(obs, y, 0)
    cols = np.arange(n_ann)
    xi_y = xi[cols[None, :], y_safe]
    spam = (1.0 - theta)[None, :] * xi_y
    cell = theta[None, :] + spam
    log_spam = np.where(obs, np.log(spam), 0.0)
    ratio = np.where(obs, np.log(cell) - np.log(spam), 0.0)

    scores = np.repeat(log_spam.sum(axis=1)[:, None], k, axis=1)
    for g in range(k):
        scores[:, g] += np.where(obs & (y_safe == g), ratio, 0.0).sum(axis=1)

    top = scores.max(axis=1)
    lse = top + np.log(np.exp(scores - top[:, None]).sum(axis=1))
    r = np.exp(scores - lse[:, None])
    ll = float(lse.sum() - n_items * np.log(k))

    rows = np.arange(n_items)
    q = np.where(obs, r[rows[:, None], y_safe] * theta[None, :] / cell, 0.0)
    return r, q, ll


def m_step(y: np.ndarray, q: np.ndarray, k: int, theta_smoothing: float, xi_smoothing: float):
    """One smoothed maximization step; returns ``(theta, xi)``.

    Additive smoothing keeps every competence strictly inside (0, 1) and
    every emission probability strictly positive.
    """
    obs = y >= 0
    y_safe = np.where(obs, y, 0)
    q_obs = np.where(obs, q, 0.0)
    n_obs = obs.sum(axis=0)
    theta = (theta_smoothing + q_obs.sum(axis=0)) / (2.0 * theta_smoothing + n_obs)

    spam_mass = np.where(obs, 1.0 - q, 0.0)
    counts = np.empty((y.shape[1], k))
    for g in range(k):
        counts[:, g] = np.where(obs & (y_safe == g), spam_mass, 0.0).sum(axis=0)
    xi = (xi_smoothing + counts) / (k * xi_smoothing + spam_mass.sum(axis=0))[:, None]
    return theta, xi
