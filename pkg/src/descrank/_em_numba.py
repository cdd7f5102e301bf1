"""Numba-jitted EM kernels: the default hot path.

Same contract as ``_em_numpy``; see there for the math. The loops are written
cell-by-cell so numba compiles them to tight machine code with no temporary
arrays beyond the outputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def e_step(y, theta, xi, k):
    n_items, n_ann = y.shape
    r = np.empty((n_items, k))
    q = np.zeros((n_items, n_ann))
    scores = np.empty(k)
    log_k = np.log(float(k))
    ll = 0.0
    for i in range(n_items):
        base = 0.0
        for g in range(k):
            scores[g] = 0.0
        for j in range(n_ann):
            lab = y[i, j]
            if lab >= 0:
                spam = (1.0 - theta[j]) * xi[j, lab]
                base += np.log(spam)
                scores[lab] += np.log(theta[j] + spam) - np.log(spam)
        top = -np.inf
        for g in range(k):
            scores[g] += base
            if scores[g] > top:
                top = scores[g]
        total = 0.0
        for g in range(k):
            total += np.exp(scores[g] - top)
        lse = top + np.log(total)
        ll += lse - log_k
        for g in range(k):
            r[i, g] = np.exp(scores[g] - lse)
        for j in range(n_ann):
            lab = y[i, j]
            if lab >= 0:
                spam = (1.0 - theta[j]) * xi[j, lab]
                q[i, j] = r[i, lab] * theta[j] / (theta[j] + spam)
    return r, q, ll


@njit(cache=True)
def m_step(y, q, k, theta_smoothing, xi_smoothing):
    n_items, n_ann = y.shape
    theta = np.empty(n_ann)
    xi = np.empty((n_ann, k))
    counts = np.empty(k)
    for j in range(n_ann):
        q_sum = 0.0
        n_obs = 0
        for g in range(k):
            counts[g] = 0.0
        for i in range(n_items):
            lab = y[i, j]
            if lab >= 0:
                q_sum += q[i, j]
                n_obs += 1
                counts[lab] += 1.0 - q[i, j]
        theta[j] = (theta_smoothing + q_sum) / (2.0 * theta_smoothing + n_obs)
        total = 0.0
        for g in range(k):
            total += counts[g]
        for g in range(k):
            xi[j, g] = (xi_smoothing + counts[g]) / (k * xi_smoothing + total)
    return theta, xi
