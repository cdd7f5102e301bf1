"""Annotator-competence model: EM fitting, decoding, and ranking.

Generative story, per item i and annotator j observed on it: a latent gold
label G_i is drawn uniformly over the K classes; with probability theta_j the
annotator copies G_i, otherwise it "spams" a label from its own emission
distribution xi_j, independent of the item. The marginal probability of an
observed label k given gold g is therefore

    theta_j * [k == g] + (1 - theta_j) * xi_j[k]

Fitting maximizes the smoothed marginal likelihood by EM with random
restarts. The additive smoothing constants act as Beta / Dirichlet style
priors, keeping theta strictly inside (0, 1) and xi rows strictly positive,
and turn each iteration into a MAP step whose penalized objective

    log-likelihood
      + theta_smoothing * sum_j [log theta_j + log(1 - theta_j)]
      + xi_smoothing * sum_{j,k} log xi_j[k]

is non-decreasing. theta_j is the competence score used to rank annotators;
the per-item posterior over gold labels is what :func:`decode` reads off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backends import get_backend
from .core import MISSING, LabelSpace, PredictionMatrix, validate_matrix
from .errors import InvalidMatrixError


@dataclass(frozen=True)
class EmConfig:
    """Hyperparameters of the EM fit.

    ``seed`` feeds restart r with ``seed + r``; ``symmetric_init`` replaces
    the random emission initialization with uniform rows, which makes the fit
    covariant under relabeling of classes (competence draws stay random, so
    restarts still differ). Initialization biases competence toward
    ``(theta_init_low, theta_init_high)`` to steer away from the mirrored
    everyone-spams solution.
    """

    restarts: int = 10
    max_iterations: int = 100
    rel_tolerance: float = 1e-6
    theta_smoothing: float = 0.5
    xi_smoothing: float = 0.1
    seed: int = 0
    theta_init_low: float = 0.3
    theta_init_high: float = 0.9
    symmetric_init: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.rel_tolerance > 0.0):
            raise ValueError("rel_tolerance must be > 0")
        if not (self.theta_smoothing > 0.0 and self.xi_smoothing > 0.0):
            raise ValueError("smoothing constants must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not (0.0 < self.theta_init_low < self.theta_init_high < 1.0):
            raise ValueError("need 0 < theta_init_low < theta_init_high < 1")


@dataclass(frozen=True, eq=False)
class MaceModel:
    """A fitted model.

    theta: per-annotator competence in (0, 1).
    xi: per-annotator emission distribution over classes when spamming.
    posteriors: per-item posterior over gold labels, the final E-step under
        the returned parameters.
    log_likelihood: marginal log-likelihood of the observations at the
        returned parameters.
    mean_nonspam: per-annotator mean of the posterior copy-probability over
        its observed cells; a diagnostic, not the ranking signal.
    objective_trajectory: penalized objective after initialization and after
        each iteration of the winning restart (non-decreasing).
    """

    theta: np.ndarray
    xi: np.ndarray
    posteriors: np.ndarray
    log_likelihood: float
    restart_index: int
    n_iterations: int
    mean_nonspam: np.ndarray
    objective_trajectory: np.ndarray

    def __post_init__(self):
        for name in ("theta", "xi", "posteriors", "mean_nonspam", "objective_trajectory"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not math.isfinite(self.log_likelihood):
            raise ValueError("log_likelihood must be finite")

    @property
    def n_annotators(self) -> int:
        return self.theta.shape[0]

    @property
    def n_classes(self) -> int:
        return self.xi.shape[1]


def cell_likelihood(theta_j: float, xi_j, observed: int, gold: int) -> float:
    """Probability of one observed label given a gold hypothesis.

    The annotator copies gold with probability ``theta_j`` and otherwise
    emits from ``xi_j``, so the observed label ``k`` has mass
    ``theta_j * [k == gold] + (1 - theta_j) * xi_j[k]``.
    """
    xi_j = np.asarray(xi_j, dtype=np.float64)
    value = (1.0 - theta_j) * float(xi_j[observed])
    if observed == gold:
        value += theta_j
    return value


def log_marginal_likelihood(matrix: PredictionMatrix, theta, xi) -> float:
    """Marginal log-likelihood of the observed labels under given parameters.

    Sums, per item, the log of the mean over gold hypotheses of the product
    of cell likelihoods (uniform prior over gold), using log-sum-exp. Unlike
    the fitting kernels this accepts boundary parameters (theta of exactly
    0 or 1).
    """
    theta = np.asarray(theta, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    k = xi.shape[1]
    y = matrix.cells
    obs = y != MISSING
    y_safe = np.where(obs, y, 0)
    cols = np.arange(matrix.n_annotators)
    spam = (1.0 - theta)[None, :] * xi[cols[None, :], y_safe]

    total = 0.0
    with np.errstate(divide="ignore"):
        for i in range(matrix.n_items):
            scores = np.empty(k)
            for g in range(k):
                cell = spam[i] + theta * (y_safe[i] == g)
                scores[g] = np.log(cell[obs[i]]).sum()
            top = scores.max()
            if np.isneginf(top):
                return float("-inf")
            total += top + np.log(np.exp(scores - top).sum()) - np.log(k)
    return float(total)


def _penalty(theta, xi, theta_smoothing, xi_smoothing) -> float:
    return float(
        theta_smoothing * (np.log(theta).sum() + np.log1p(-theta).sum())
        + xi_smoothing * np.log(xi).sum()
    )


def _initial_parameters(rng, n_ann: int, k: int, config: EmConfig):
    # Draw order is part of the reproducibility contract: theta first, xi second.
    theta = rng.uniform(config.theta_init_low, config.theta_init_high, size=n_ann)
    if config.symmetric_init:
        xi = np.full((n_ann, k), 1.0 / k)
    else:
        xi = rng.uniform(1e-12, 1.0, size=(n_ann, k))
        xi /= xi.sum(axis=1, keepdims=True)
    return theta, xi


def fit_em(matrix: PredictionMatrix, space: LabelSpace, config: EmConfig = EmConfig()) -> MaceModel:
    """Fit by EM with random restarts; return the highest-likelihood restart.

    Each restart initializes parameters from ``default_rng(seed + restart)``,
    then alternates smoothed M-steps and E-steps until the relative gain of
    the penalized objective drops below ``rel_tolerance`` or the iteration
    cap is hit. The returned posteriors are the final E-step under the
    returned parameters. Identical inputs give a bit-identical model.
    """
    check = validate_matrix(matrix, space)
    if not check.ok:
        raise InvalidMatrixError(check.violations)
    kern = get_backend()
    y = matrix.cells
    k = space.k
    n_ann = matrix.n_annotators
    obs_per_annotator = (y != MISSING).sum(axis=0)

    best = None
    for restart in range(config.restarts):
        rng = np.random.default_rng(config.seed + restart)
        theta, xi = _initial_parameters(rng, n_ann, k, config)
        r, q, ll = kern.e_step(y, theta, xi, k)
        objective = ll + _penalty(theta, xi, config.theta_smoothing, config.xi_smoothing)
        trajectory = [objective]
        iterations = 0
        for it in range(config.max_iterations):
            theta, xi = kern.m_step(y, q, k, config.theta_smoothing, config.xi_smoothing)
            r, q, ll = kern.e_step(y, theta, xi, k)
            new_objective = ll + _penalty(theta, xi, config.theta_smoothing, config.xi_smoothing)
            trajectory.append(new_objective)
            iterations = it + 1
            gain = new_objective - objective
            objective = new_objective
            if gain <= config.rel_tolerance * abs(objective):
                break
        if best is None or ll > best[0]:
            q_obs = np.where(y != MISSING, q, 0.0)
            mean_nonspam = q_obs.sum(axis=0) / obs_per_annotator
            best = (ll, restart, iterations, theta, xi, r, mean_nonspam, trajectory)

    ll, restart, iterations, theta, xi, r, mean_nonspam, trajectory = best
    return MaceModel(
        theta=theta,
        xi=xi,
        posteriors=r,
        log_likelihood=ll,
        restart_index=restart,
        n_iterations=iterations,
        mean_nonspam=mean_nonspam,
        objective_trajectory=np.asarray(trajectory),
    )


def decode(model: MaceModel):
    """Hard labels from the gold posteriors: ``(labels, confidence)``.

    Per item, the argmax class (ties to the lowest index) and the posterior
    mass it holds.
    """
    labels = np.argmax(model.posteriors, axis=1)
    confidence = model.posteriors[np.arange(model.posteriors.shape[0]), labels]
    return labels, confidence.copy()


def rank_by_theta(model: MaceModel, annotator_ids) -> list[tuple[str, float]]:
    """Annotators ordered by descending competence; ties by id, ascending."""
    annotator_ids = tuple(annotator_ids)
    if len(annotator_ids) != model.n_annotators:
        raise ValueError(
            f"got {len(annotator_ids)} annotator ids for {model.n_annotators} annotators"
        )
    pairs = [(aid, float(t)) for aid, t in zip(annotator_ids, model.theta)]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))
