"""Posterior summaries, error metrics, and the proportional-odds baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .likelihood import Dataset, ModelSpec, ParametricState
from .sampler import SampleRecord


# -- probability reconstruction ------------------------------------------------


def record_category_probs(
    record: SampleRecord, dataset: Dataset, model: ModelSpec
) -> np.ndarray:
    """N x K category probabilities implied by one stored sample."""
    if record.probs is not None:
        return record.probs
    from .likelihood import SurvivalCache

    config = record.to_config(model)
    theta = ParametricState(record.beta, record.gamma, record.tau2)
    cache = SurvivalCache(dataset, model.link, theta, config)
    return cache.category_prob_matrix()


class MaeAccumulator:
    """Running sums of |estimated - true| category probabilities.

    Consumes one probability matrix per posterior sample so long chains can
    be scored without storing per-sample predictions.
    """

    def __init__(self, truth_probs: np.ndarray, y: np.ndarray):
        self.truth = np.asarray(truth_probs, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        if self.truth.shape[0] != self.y.size:
            raise ValueError("truth matrix and labels disagree on N")
        self.diff_sums = np.zeros_like(self.truth)
        self.mean_sums = np.zeros_like(self.truth)
        self.n_samples = 0

    def add(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        self.diff_sums += np.abs(probs - self.truth)
        self.mean_sums += probs
        self.n_samples += 1

    def _check(self):
        if self.n_samples == 0:
            raise ValueError("no posterior samples accumulated")

    def mae_k(self, k: int) -> float:
        """Mean absolute error of p-hat(y_n | x_n) over observations with
        y_n = k, averaged over posterior samples."""
        self._check()
        rows = np.flatnonzero(self.y == k)
        if rows.size == 0:
            raise ValueError(f"no observations in category {k}")
        return float(self.diff_sums[rows, k - 1].mean() / self.n_samples)

    def mae_overall(self) -> float:
        self._check()
        return float(self.diff_sums.mean() / self.n_samples)

    def posterior_mean_probs(self) -> np.ndarray:
        self._check()
        return self.mean_sums / self.n_samples


def _accumulate(samples, oracle, dataset: Dataset, model: ModelSpec) -> MaeAccumulator:
    truth = oracle.category_probs(dataset.X, dataset.Z)
    acc = MaeAccumulator(truth, dataset.y)
    for record in samples:
        acc.add(record_category_probs(record, dataset, model))
    return acc


def mae_k(samples, oracle, dataset: Dataset, model: ModelSpec, k: int) -> float:
    return _accumulate(samples, oracle, dataset, model).mae_k(k)


def mae_overall(samples, oracle, dataset: Dataset, model: ModelSpec) -> float:
    return _accumulate(samples, oracle, dataset, model).mae_overall()


@dataclass
class PosteriorSummary:
    """Monte Carlo means and traces assembled from a sample stream."""

    mean_survival: np.ndarray  # N x (K+1), S(1)..S(K+1)
    mean_probs: np.ndarray  # N x K
    loglik_trace: np.ndarray  # L
    occupancy_trace: np.ndarray  # L x n_subspaces
    n_samples: int


def summarize_posterior(samples, dataset: Dataset, model: ModelSpec) -> PosteriorSummary:
    """Average survival curves and category probabilities over a stream."""
    from .likelihood import SurvivalCache, survival_matrix

    surv_sum = None
    prob_sum = None
    logliks = []
    occupancy = []
    n = 0
    for record in samples:
        config = record.to_config(model)
        theta = ParametricState(record.beta, record.gamma, record.tau2)
        cache = SurvivalCache(dataset, model.link, theta, config)
        surv = survival_matrix(cache.lam, cache.eta, model.link)
        probs = surv[:, :-1] - surv[:, 1:]
        if surv_sum is None:
            surv_sum = surv
            prob_sum = probs
        else:
            surv_sum += surv
            prob_sum += probs
        logliks.append(record.loglik)
        occupancy.append(record.counts)
        n += 1
    if n == 0:
        raise ValueError("no samples")
    return PosteriorSummary(
        mean_survival=surv_sum / n,
        mean_probs=prob_sum / n,
        loglik_trace=np.array(logliks),
        occupancy_trace=np.array(occupancy),
        n_samples=n,
    )


# -- covariate selection summaries ----------------------------------------------


def _subspace_masks(n_subspaces: int):
    from .geometry import enumerate_subspaces

    p = int(round(math.log2(n_subspaces + 1)))
    if 2**p - 1 != n_subspaces:
        raise ValueError(f"count vector length {n_subspaces} is not 2^p - 1")
    return [sub.mask for sub in enumerate_subspaces(p)]


def inclusion_probability(samples, j: int) -> float:
    """Fraction of samples with at least one point in a subspace whose mask
    contains covariate j (0-based)."""
    hits = 0
    total = 0
    masks = None
    for record in samples:
        if masks is None:
            masks = _subspace_masks(record.counts.size)
            cols = [i for i, m in enumerate(masks) if j in m]
            if not cols:
                raise ValueError(f"covariate {j} outside the model")
        total += 1
        if record.counts[cols].sum() > 0:
            hits += 1
    if total == 0:
        raise ValueError("no samples")
    return hits / total


def mean_point_count(samples, j: int) -> float:
    """Posterior mean of the total point count over subspaces containing j."""
    total = 0
    acc = 0.0
    cols = None
    for record in samples:
        if cols is None:
            masks = _subspace_masks(record.counts.size)
            cols = [i for i, m in enumerate(masks) if j in m]
            if not cols:
                raise ValueError(f"covariate {j} outside the model")
        acc += float(record.counts[cols].sum())
        total += 1
    if total == 0:
        raise ValueError("no samples")
    return acc / total


# -- posterior surfaces -----------------------------------------------------------


def _record_lambda(record: SampleRecord, X: np.ndarray, k: int) -> np.ndarray:
    """Level-k envelope of one stored sample at the rows of X."""
    lam = np.full(X.shape[0], record.origin_marks[k - 1])
    for _, loc, marks in record.points:
        dom = np.all(X >= loc, axis=1)
        if dom.any():
            lam[dom] = np.maximum(lam[dom], marks[k - 1])
    return lam


def posterior_mean_surface(
    samples,
    grid: np.ndarray,
    k: int,
    model: ModelSpec,
    z=None,
    cluster_effect: float = 0.0,
) -> np.ndarray:
    """Posterior mean of S(k | x, z, c) at each grid row.

    The cluster effect defaults to its prior expectation of zero.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if k == 1:
        return np.ones(grid.shape[0])
    acc = np.zeros(grid.shape[0])
    n = 0
    for record in samples:
        lam = _record_lambda(record, grid, k)
        if model.link.kind == "logit":
            offset = cluster_effect
            if z is not None and record.beta.size:
                offset += float(np.dot(record.beta, np.asarray(z, dtype=float)))
            acc += expit(lam + offset)
        else:
            acc += lam
        n += 1
    if n == 0:
        raise ValueError("no samples")
    return acc / n


def make_grid(m: int, p: int = 2) -> np.ndarray:
    """Regular m^p grid over [0,1]^p, rows in C order."""
    axes = [np.linspace(0.0, 1.0, m)] * p
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([ax.ravel() for ax in mesh])


def standardized_function(
    samples, X_data: np.ndarray, j: int, grid_values: np.ndarray, k: int,
    model: ModelSpec,
) -> np.ndarray:
    """Covariate-j effect curve: expit of the level-k envelope with x_j pinned
    to each grid value, averaged over the empirical distribution of the other
    covariates and (as a rolling mean) over the posterior samples."""
    if model.link.kind != "logit":
        raise ValueError("standardized functions are defined on the logit scale")
    X = np.asarray(X_data, dtype=float)
    grid_values = np.asarray(grid_values, dtype=float)
    others = np.delete(np.arange(X.shape[1]), j)
    acc = np.zeros(grid_values.size)
    n = 0
    for record in samples:
        lam = np.full((X.shape[0], grid_values.size), record.origin_marks[k - 1])
        for _, loc, marks in record.points:
            dom_other = np.all(X[:, others] >= loc[others], axis=1)
            if not dom_other.any():
                continue
            dom_j = grid_values >= loc[j]
            if not dom_j.any():
                continue
            cell = np.outer(dom_other, dom_j)
            lam = np.maximum(lam, np.where(cell, marks[k - 1], -np.inf))
        acc += expit(lam).mean(axis=0)
        n += 1
    if n == 0:
        raise ValueError("no samples")
    return acc / n


# -- proportional-odds baseline -----------------------------------------------------


@dataclass
class BaselineState:
    """Cutpoints (strictly decreasing) and common slopes of the
    proportional-odds model logit S(k|x) = alpha_k + beta'x."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if np.any(np.diff(self.alpha) >= 0):
            raise ValueError("cutpoints must be strictly decreasing")


@dataclass
class BaselineResult:
    alphas: np.ndarray  # L x (K-1)
    betas: np.ndarray  # L x p
    loglik: np.ndarray  # L
    acceptance: dict[str, float] = field(default_factory=dict)

    def posterior_mean(self) -> BaselineState:
        return BaselineState(self.alphas.mean(axis=0), self.betas.mean(axis=0))


def po_log_likelihood(alpha: np.ndarray, beta: np.ndarray, X, y, K: int) -> float:
    """Log-likelihood of the proportional-odds model."""
    xb = X @ beta
    surv = np.ones((X.shape[0], K + 1))
    surv[:, K] = 0.0
    surv[:, 1:K] = expit(alpha[None, :] + xb[:, None])
    rows = np.arange(y.size)
    prob = surv[rows, y - 1] - surv[rows, y]
    if np.any(prob <= 0.0):
        return -math.inf
    return float(np.sum(np.log(prob)))


def fit_po_baseline(
    dataset: Dataset,
    iterations: int,
    seed: int,
    *,
    burn_in: int = 0,
    thin: int = 1,
    n_categories: int | None = None,
    scale: float = 0.1,
    use_linear: bool = True,
) -> BaselineResult:
    """Random-walk M-H over (alpha, beta) with flat priors.

    Proposals that break the strict ordering of the cutpoints are rejected
    outright.  Raises on degenerate single-category data, where the
    likelihood has no interior maximum.
    """
    K = int(n_categories if n_categories is not None else dataset.y.max())
    if np.unique(dataset.y).size < 2:
        raise ValueError("single-category response: baseline likelihood diverges")
    X = dataset.X
    if use_linear and dataset.Z is not None:
        X = np.hstack([X, dataset.Z])
    y = dataset.y
    rng = np.random.default_rng(seed)

    # cutpoint starts from empirical marginal survival fractions
    s_emp = np.array([(y >= k).mean() for k in range(2, K + 1)])
    s_emp = np.clip(s_emp, 1e-3, 1 - 1e-3)
    alpha = np.log(s_emp / (1 - s_emp))
    for i in range(1, alpha.size):
        if alpha[i] >= alpha[i - 1]:
            alpha[i] = alpha[i - 1] - 1e-6
    beta = np.zeros(X.shape[1])
    ll = po_log_likelihood(alpha, beta, X, y, K)

    attempts = {"alpha": 0, "accept_alpha": 0, "beta": 0, "accept_beta": 0}
    alphas, betas, logliks = [], [], []
    total = burn_in + iterations
    for it in range(1, total + 1):
        for i in range(alpha.size):
            attempts["alpha"] += 1
            prop = alpha.copy()
            prop[i] += scale * rng.standard_normal()
            if np.any(np.diff(prop) >= 0):
                continue
            ll_new = po_log_likelihood(prop, beta, X, y, K)
            if math.log(rng.random()) < ll_new - ll:
                alpha, ll = prop, ll_new
                attempts["accept_alpha"] += 1
        for j in range(beta.size):
            attempts["beta"] += 1
            prop = beta.copy()
            prop[j] += scale * rng.standard_normal()
            ll_new = po_log_likelihood(alpha, prop, X, y, K)
            if math.log(rng.random()) < ll_new - ll:
                beta, ll = prop, ll_new
                attempts["accept_beta"] += 1
        if it > burn_in and (it - burn_in) % thin == 0:
            alphas.append(alpha.copy())
            betas.append(beta.copy())
            logliks.append(ll)

    acceptance = {
        "alpha": attempts["accept_alpha"] / max(attempts["alpha"], 1),
        "beta": attempts["accept_beta"] / max(attempts["beta"], 1),
    }
    return BaselineResult(
        alphas=np.array(alphas),
        betas=np.array(betas),
        loglik=np.array(logliks),
        acceptance=acceptance,
    )
