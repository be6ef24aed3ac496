"""Synthetic ordinal datasets with exact truth oracles.

Three families of monotone survival surfaces on the unit square (linear,
continuous with a flat region, and discontinuous step surfaces), each in a
fully non-parametric variant (survival levels in [0,1], identity link) and a
semi-parametric variant (levels rescaled to [-2,2] and passed through a
logit link together with three standard-normal linear covariates).

The constants below are this package's scenario manifest: they pin the
surfaces the generators and every downstream check rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .likelihood import Dataset

N_CATEGORIES = 5
N_COVARIATES = 2

FAMILIES = ("linear", "continuous", "discontinuous")
MODES = ("nonparametric", "semiparametric")

SEMI_BETA = np.array([0.3, -0.5, 0.1])
SEMI_RANGE = (-2.0, 2.0)

# Survival levels for k = 2..5; S(1) = 1 everywhere.
LINEAR_INTERCEPTS = np.array([0.65, 0.35, 0.15, 0.05])
LINEAR_SLOPES = np.array([0.3, 0.5, 0.5, 0.3])

CONTINUOUS_THRESHOLD = 0.25
CONTINUOUS_BASE = np.array([0.55, 0.30, 0.22, 0.15])
CONTINUOUS_GAIN = np.array([0.40, 0.50, 0.50, 0.50])

DISCONT_X1 = np.array([0.15, 0.30, 0.50, 0.65])
DISCONT_X2 = np.array([0.20, 0.35, 0.45, 0.60])
DISCONT_LOW = np.array([0.55, 0.45, 0.35, 0.25])
DISCONT_HIGH = np.array([0.95, 0.85, 0.75, 0.65])


@dataclass(frozen=True)
class ScenarioSpec:
    family: str
    mode: str = "nonparametric"
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n < 1:
            raise ValueError("need at least one observation")


def _shape_surfaces(family: str, X: np.ndarray) -> np.ndarray:
    """Levels of S(2..5 | x) on the [0,1] scale for the given family."""
    X = np.asarray(X, dtype=float)
    if family == "linear":
        t = X.mean(axis=1)
        s = LINEAR_INTERCEPTS + LINEAR_SLOPES * t[:, None]
        return np.clip(s, 0.0, 1.0)
    if family == "continuous":
        m = X.min(axis=1)
        h = np.clip((m - CONTINUOUS_THRESHOLD) / (1.0 - CONTINUOUS_THRESHOLD), 0.0, 1.0)
        return CONTINUOUS_BASE + CONTINUOUS_GAIN * h[:, None]
    jump = (X[:, 0:1] >= DISCONT_X1) & (X[:, 1:2] >= DISCONT_X2)
    return np.where(jump, DISCONT_HIGH, DISCONT_LOW)


@dataclass(frozen=True)
class TruthOracle:
    """Closed-form survival and category probabilities for a scenario."""

    family: str
    mode: str

    @property
    def semiparametric(self) -> bool:
        return self.mode == "semiparametric"

    @property
    def beta(self) -> np.ndarray:
        return SEMI_BETA.copy()

    def lambda_levels(self, X) -> np.ndarray:
        """Envelope levels for k = 2..K on the model's own scale."""
        s = _shape_surfaces(self.family, np.atleast_2d(X))
        if not self.semiparametric:
            return s
        lo, hi = SEMI_RANGE
        return lo + (hi - lo) * s

    def survival(self, X, Z=None) -> np.ndarray:
        """N x K matrix of S(k | x[, z]) for k = 1..K."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        levels = self.lambda_levels(X)
        if self.semiparametric:
            offset = np.zeros(X.shape[0]) if Z is None else np.atleast_2d(Z) @ SEMI_BETA
            levels = expit(levels + offset[:, None])
        return np.hstack([np.ones((X.shape[0], 1)), levels])

    def category_probs(self, X, Z=None) -> np.ndarray:
        s = self.survival(X, Z)
        s = np.hstack([s, np.zeros((s.shape[0], 1))])
        return s[:, :-1] - s[:, 1:]


def truth_probs(oracle: TruthOracle, x, z=None) -> np.ndarray:
    """Exact category probabilities at a single covariate value."""
    probs = oracle.category_probs(
        np.atleast_2d(x), None if z is None else np.atleast_2d(z)
    )
    return probs[0]


@dataclass(frozen=True)
class SelectionOracle:
    """Truth over the first two covariates only; extra covariates are pure
    noise with no effect on the response."""

    base: TruthOracle

    def category_probs(self, X, Z=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.base.category_probs(X[:, :N_COVARIATES], Z)

    def survival(self, X, Z=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.base.survival(X[:, :N_COVARIATES], Z)


def make_selection_scenario(
    n: int, seed: int, n_noise: int = 1, family: str = "discontinuous"
) -> tuple[Dataset, SelectionOracle]:
    """Dataset with ``n_noise`` extra uniform covariates the truth ignores."""
    oracle = SelectionOracle(TruthOracle(family, "nonparametric"))
    rng_x = np.random.default_rng([seed, 1])
    X = rng_x.random((n, N_COVARIATES + n_noise))
    probs = oracle.category_probs(X)
    rng_y = np.random.default_rng([seed, 3])
    u = rng_y.random(n)
    y = 1 + (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    y = np.minimum(y, N_CATEGORIES)
    return Dataset(X=X, y=y), oracle


def make_scenario(spec: ScenarioSpec) -> tuple[Dataset, TruthOracle]:
    """Draw a dataset from the scenario.

    Component streams are seeded separately so a size-1000 draw is exactly
    the first 1000 rows of the size-5000 draw with the same seed.
    """
    oracle = TruthOracle(spec.family, spec.mode)
    rng_x = np.random.default_rng([spec.seed, 1])
    X = rng_x.random((spec.n, N_COVARIATES))
    Z = None
    if oracle.semiparametric:
        rng_z = np.random.default_rng([spec.seed, 2])
        Z = rng_z.standard_normal((spec.n, SEMI_BETA.size))
    probs = oracle.category_probs(X, Z)
    rng_y = np.random.default_rng([spec.seed, 3])
    u = rng_y.random(spec.n)
    y = 1 + (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    y = np.minimum(y, N_CATEGORIES)
    return Dataset(X=X, y=y, Z=Z), oracle
