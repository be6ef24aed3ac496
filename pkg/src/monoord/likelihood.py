"""Ordinal likelihood for envelope configurations, with incremental caching.

The identity link reads survival probabilities straight off the envelope;
the logit link treats the envelope levels as category-specific intercepts
and adds a linear predictor for extra covariates and cluster effects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .geometry import Configuration, MarkSpace

NEG_INF = float("-inf")


@dataclass(frozen=True)
class LinkSpec:
    """Link choice plus the interval A the envelope levels live in."""

    kind: str  # "identity" | "logit"
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in ("identity", "logit"):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == "identity" and (self.lower, self.upper) != (0.0, 1.0):
            raise ValueError("identity link requires the range [0, 1]")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("link range must be finite")
        if not self.lower < self.upper:
            raise ValueError("link range must have positive width")

    @classmethod
    def identity(cls) -> "LinkSpec":
        return cls("identity", 0.0, 1.0)

    @classmethod
    def logit(cls, lower: float, upper: float) -> "LinkSpec":
        return cls("logit", float(lower), float(upper))

    def mark_space(self) -> MarkSpace:
        if self.kind == "identity":
            return MarkSpace(0.0, 1.0, pinned_first=1.0)
        return MarkSpace(self.lower, self.upper, pinned_first=None)


@dataclass
class Dataset:
    """Observations: monotone covariates X in [0,1]^p, ordinal response y in
    1..K, optional linear covariates Z and 1-based cluster ids."""

    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray | None = None
    cluster: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be an N x p matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y must have one label per row of X")
        if np.any(self.X < 0.0) or np.any(self.X > 1.0):
            raise ValueError("X entries must lie in [0, 1]")
        if self.Z is not None:
            self.Z = np.asarray(self.Z, dtype=float)
            if self.Z.ndim != 2 or self.Z.shape[0] != self.n:
                raise ValueError("Z must be an N x q matrix")
        if self.cluster is not None:
            self.cluster = np.asarray(self.cluster, dtype=np.int64)
            if self.cluster.shape != (self.n,):
                raise ValueError("cluster must have one id per observation")
            ids = np.unique(self.cluster)
            if ids[0] != 1 or np.any(np.diff(ids) != 1):
                raise ValueError("cluster ids must be contiguous from 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return 0 if self.Z is None else self.Z.shape[1]

    @property
    def n_clusters(self) -> int:
        return 0 if self.cluster is None else int(self.cluster.max())

    def check_labels(self, n_categories: int):
        if np.any(self.y < 1) or np.any(self.y > n_categories):
            raise ValueError(f"response labels must lie in 1..{n_categories}")


@dataclass
class ParametricState:
    """Linear coefficients, cluster intercepts and their variance."""

    beta: np.ndarray
    gamma: np.ndarray
    tau2: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")

    @classmethod
    def empty(cls) -> "ParametricState":
        return cls(beta=np.zeros(0), gamma=np.zeros(0))

    @property
    def is_empty(self) -> bool:
        return self.beta.size == 0 and self.gamma.size == 0

    def copy(self) -> "ParametricState":
        return ParametricState(self.beta.copy(), self.gamma.copy(), self.tau2)


@dataclass(frozen=True)
class ModelSpec:
    """Everything that defines the model apart from the data."""

    n_categories: int
    n_covariates: int
    link: LinkSpec
    n_linear: int = 0
    n_clusters: int = 0
    a: float = 0.1
    b: float = 0.1
    d: int = 0
    tau2_shape: float = 0.01
    tau2_rate: float = 0.01

    def __post_init__(self):
        if self.n_categories < 2:
            raise ValueError("need at least two outcome categories")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("intensity hyperparameters must be positive")
        if self.d < 0:
            raise ValueError("origin penalty d must be non-negative")
        if self.link.kind == "identity" and (self.n_linear or self.n_clusters):
            raise ValueError("linear covariates and clusters require a link")


def _offset(z, c, theta: ParametricState | None) -> float:
    out = 0.0
    if theta is None:
        return out
    if theta.beta.size and z is not None:
        out += float(np.dot(theta.beta, np.asarray(z, dtype=float)))
    if theta.gamma.size and c is not None:
        out += float(theta.gamma[int(c) - 1])
    return out


def survival(
    k: int,
    x,
    z,
    c,
    config: Configuration,
    theta: ParametricState | None,
    link: LinkSpec,
) -> float:
    """P(Y >= k | x, z, c); S(1) = 1 and S(K+1) = 0 by definition."""
    K = config.n_levels
    if not 1 <= k <= K + 1:
        raise ValueError(f"level k={k} outside 1..{K + 1}")
    if k == 1:
        return 1.0
    if k == K + 1:
        return 0.0
    from .geometry import evaluate_lambda

    lam = evaluate_lambda(config, x, k)
    if link.kind == "identity":
        return lam
    return float(expit(lam + _offset(z, c, theta)))


def category_probs(
    x, z, c, config: Configuration, theta: ParametricState | None, link: LinkSpec
) -> np.ndarray:
    """(P(Y=1|...), ..., P(Y=K|...)); differences of adjacent survivals."""
    K = config.n_levels
    s = np.array(
        [survival(k, x, z, c, config, theta, link) for k in range(1, K + 2)]
    )
    return s[:-1] - s[1:]


def lambda_matrix(config: Configuration, X: np.ndarray) -> np.ndarray:
    """Envelope levels at every row of X, by scanning all points."""
    X = np.asarray(X, dtype=float)
    lam = np.tile(config.origin.marks, (X.shape[0], 1))
    for slot in config.alive_slots():
        dom = np.all(X >= config._loc[slot], axis=1)
        if dom.any():
            lam[dom] = np.maximum(lam[dom], config._marks[slot])
    return lam


def survival_matrix(
    lam: np.ndarray, eta: np.ndarray | None, link: LinkSpec
) -> np.ndarray:
    """N x (K+1) matrix of S(k|...) for k = 1..K+1 from envelope levels."""
    n, K = lam.shape
    s = np.empty((n, K + 1))
    s[:, 0] = 1.0
    s[:, K] = 0.0
    if link.kind == "identity":
        s[:, 1:K] = lam[:, 1:]
    else:
        shifted = lam[:, 1:] if eta is None else lam[:, 1:] + eta[:, None]
        s[:, 1:K] = expit(shifted)
    return s


def _row_log_probs(surv: np.ndarray, y: np.ndarray) -> np.ndarray:
    rows = np.arange(y.size)
    prob = surv[rows, y - 1] - surv[rows, y]
    out = np.full(y.size, NEG_INF)
    pos = prob > 0.0
    out[pos] = np.log(prob[pos])
    return out


def log_likelihood(
    dataset: Dataset,
    config: Configuration,
    theta: ParametricState | None,
    link: LinkSpec,
) -> float:
    """Exact log-likelihood by full recomputation (the reference path).

    Returns -inf when any observation's category probability is <= 0,
    which can only happen at exact mark ties under the identity link.
    """
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    lam = lambda_matrix(config, dataset.X)
    eta = None
    if link.kind == "logit" and theta is not None and not theta.is_empty:
        eta = np.zeros(dataset.n)
        if theta.beta.size:
            eta += dataset.Z @ theta.beta
        if theta.gamma.size:
            eta += theta.gamma[dataset.cluster - 1]
    surv = survival_matrix(lam, eta, link)
    rows = _row_log_probs(surv, dataset.y)
    if np.any(rows == NEG_INF):
        return NEG_INF
    return math.fsum(rows.tolist())


# -- incremental cache -------------------------------------------------------


@dataclass
class _Pending:
    kind: str
    rows: np.ndarray
    old_lam: np.ndarray | None
    old_ll: np.ndarray
    old_eta: np.ndarray | None = None
    dom: np.ndarray | None = None


class SurvivalCache:
    """Per-observation envelope levels and log category probabilities,
    updated in place by local edits with commit/rollback support.

    The cache holds a reference to the configuration and relies on the
    caller to mutate it only after the matching commit; proposals are
    evaluated against the pre-move configuration plus the prospective
    values passed in.
    """

    def __init__(
        self,
        dataset: Dataset,
        link: LinkSpec,
        theta: ParametricState | None,
        config: Configuration,
    ):
        self.dataset = dataset
        self.link = link
        self.theta = theta
        self.config = config
        self._y = dataset.y
        self._X = np.ascontiguousarray(dataset.X)
        self._dom = np.zeros((16, dataset.n), dtype=bool)
        for slot in config.alive_slots():
            slot = int(slot)
            self._ensure_dom_capacity(slot)
            self._dom[slot] = _kernels.dominated_mask(self._X, config._loc[slot])
        self.lam = lambda_matrix(config, dataset.X)
        self.eta = np.zeros(dataset.n)
        if link.kind == "logit" and theta is not None:
            if theta.beta.size:
                self.eta += dataset.Z @ theta.beta
            if theta.gamma.size:
                self.eta += theta.gamma[dataset.cluster - 1]
        self.ll = self._row_ll(np.arange(dataset.n))
        self._pending: list[_Pending] = []
        self._neg_inf_marks = np.full(config.n_levels, -np.inf)
        self._all_rows_mask = np.ones(dataset.n, dtype=bool)

    def _ensure_dom_capacity(self, slot: int):
        while slot >= self._dom.shape[0]:
            self._dom = np.vstack(
                [self._dom, np.zeros_like(self._dom)]
            )

    # -- queries ----------------------------------------------------------

    def total(self) -> float:
        if np.any(self.ll == NEG_INF):
            return NEG_INF
        return float(np.sum(self.ll))

    def total_exact(self) -> float:
        if np.any(self.ll == NEG_INF):
            return NEG_INF
        return math.fsum(self.ll.tolist())

    def category_prob_matrix(self) -> np.ndarray:
        surv = survival_matrix(self.lam, self.eta, self.link)
        return surv[:, :-1] - surv[:, 1:]

    def dominated_mask(self, location) -> np.ndarray:
        loc = np.ascontiguousarray(location, dtype=float)
        return _kernels.dominated_mask(self._X, loc)

    # -- internals ----------------------------------------------------------

    def _row_ll(self, rows: np.ndarray) -> np.ndarray:
        y = self._y[rows]
        K = self.lam.shape[1]
        if self.link.kind == "identity":
            s_hi = np.where(y == 1, 1.0, self.lam[rows, np.minimum(y, K) - 1])
            s_lo = np.where(y == K, 0.0, self.lam[rows, np.minimum(y, K - 1)])
        else:
            eta = self.eta[rows]
            s_hi = np.where(
                y == 1, 1.0, expit(self.lam[rows, np.minimum(y, K) - 1] + eta)
            )
            s_lo = np.where(
                y == K, 0.0, expit(self.lam[rows, np.minimum(y, K - 1)] + eta)
            )
        prob = s_hi - s_lo
        out = np.full(rows.size, NEG_INF)
        pos = prob > 0.0
        out[pos] = np.log(prob[pos])
        return out

    def _row_ll_sum(self, rows: np.ndarray) -> tuple[np.ndarray, float]:
        if _kernels.HAVE_NUMBA:
            if self.link.kind == "identity":
                return _kernels.row_loglik_identity(self.lam, rows, self._y)
            return _kernels.row_loglik_logit(self.lam, self.eta, rows, self._y)
        arr = self._row_ll(rows)
        total = NEG_INF if np.any(arr == NEG_INF) else float(np.sum(arr))
        return arr, total

    @staticmethod
    def _delta(new_total: float, old_total: float) -> float:
        if new_total == NEG_INF:
            return NEG_INF
        if old_total == NEG_INF:
            return math.inf
        return new_total - old_total

    def _stash(self, kind, rows, old_lam, old_ll, old_eta=None, dom=None):
        self._pending.append(
            _Pending(kind, rows, old_lam, old_ll, old_eta=old_eta, dom=dom)
        )

    def _rescan(
        self, rows: np.ndarray, exclude_slot: int | None, origin=None
    ) -> np.ndarray:
        """Envelope at the given rows recomputed from all other points.

        ``origin`` overrides the origin contribution (used when proposing
        new origin levels); by default the current origin marks seed the max.
        """
        if origin is None:
            origin = self.config.origin.marks
        alive = self.config.alive_slots()
        exclude = -1 if exclude_slot is None else exclude_slot
        return _kernels.masked_max(
            self._dom,
            self.config._marks,
            alive,
            exclude,
            np.ascontiguousarray(rows, dtype=np.int64),
            np.ascontiguousarray(origin, dtype=float),
        )

    # -- proposals ----------------------------------------------------------

    def _apply_rows(self, kind, rows, new_lam, dom=None) -> float:
        old_lam = self.lam[rows].copy()
        old_ll = self.ll[rows].copy()
        old_total = float(np.sum(old_ll))
        if new_lam is not None:
            self.lam[rows] = new_lam
        new_ll, new_total = self._row_ll_sum(rows)
        self.ll[rows] = new_ll
        self._stash(kind, rows, old_lam, old_ll, dom=dom)
        return self._delta(new_total, old_total)

    def propose_birth(self, dom: np.ndarray, marks: np.ndarray) -> float:
        rows = _kernels.birth_rows(self.lam, dom, marks)
        new_lam = np.maximum(self.lam[rows], marks)
        return self._apply_rows("birth", rows, new_lam, dom=dom)

    def propose_death(self, slot: int) -> float:
        dom = self._dom[slot]
        marks = self.config._marks[slot]
        rows = _kernels.tie_rows(self.lam, dom, marks, self._neg_inf_marks)
        new_lam = self._rescan(rows, exclude_slot=slot)
        return self._apply_rows("death", rows, new_lam)

    def propose_marks(self, slot: int, new_marks: np.ndarray) -> float:
        dom = self._dom[slot]
        old_marks = self.config._marks[slot]
        rows = _kernels.tie_rows(self.lam, dom, old_marks, new_marks)
        new_lam = self._rescan(rows, exclude_slot=slot)
        np.maximum(new_lam, new_marks, out=new_lam)
        return self._apply_rows("marks", rows, new_lam)

    def propose_position(self, slot: int, new_dom: np.ndarray) -> float:
        old_dom = self._dom[slot]
        marks = self.config._marks[slot]
        rows = _kernels.position_rows(self.lam, old_dom, new_dom, marks)
        new_lam = self._rescan(rows, exclude_slot=slot)
        sel = new_dom[rows]
        if sel.any():
            new_lam[sel] = np.maximum(new_lam[sel], marks)
        return self._apply_rows("position", rows, new_lam, dom=new_dom)

    def propose_origin(self, new_origin: np.ndarray) -> float:
        old_origin = self.config.origin.marks
        rows = _kernels.tie_rows(
            self.lam, self._all_rows_mask, old_origin, new_origin
        )
        # seed the rescan below every mark so only support points contribute,
        # then reapply the proposed origin; untouched levels come out unchanged
        new_lam = self._rescan(rows, None, origin=self._neg_inf_marks)
        np.maximum(new_lam, new_origin, out=new_lam)
        return self._apply_rows("origin", rows, new_lam)

    def _apply_eta(self, kind, rows, new_eta_rows) -> float:
        old_ll = self.ll[rows].copy()
        old_eta = self.eta[rows].copy()
        old_total = float(np.sum(old_ll))
        self.eta[rows] = new_eta_rows
        new_ll, new_total = self._row_ll_sum(rows)
        self.ll[rows] = new_ll
        self._stash(kind, rows, None, old_ll, old_eta=old_eta)
        return self._delta(new_total, old_total)

    def propose_beta(self, j: int, new_bj: float) -> float:
        dz = (new_bj - self.theta.beta[j]) * self.dataset.Z[:, j]
        rows = np.flatnonzero(dz != 0.0)
        return self._apply_eta("beta", rows, self.eta[rows] + dz[rows])

    def propose_gamma(self, c: int, new_gc: float) -> float:
        rows = np.flatnonzero(self.dataset.cluster == c)
        shift = new_gc - self.theta.gamma[c - 1]
        return self._apply_eta("gamma", rows, self.eta[rows] + shift)

    # -- resolution -----------------------------------------------------------

    def _pop(self, kind: str) -> _Pending:
        if not self._pending or self._pending[0].kind != kind:
            raise RuntimeError(f"no pending {kind} edit")
        return self._pending.pop(0)

    def commit_birth(self, slot: int):
        entry = self._pop("birth")
        self._ensure_dom_capacity(slot)
        self._dom[slot] = entry.dom

    def commit_death(self, slot: int):
        # the slot's dominance row goes stale; it is never read again until
        # a later birth commit overwrites it
        self._pop("death")

    def commit_position(self, slot: int):
        entry = self._pop("position")
        self._dom[slot] = entry.dom

    def commit_plain(self):
        entry = self._pending.pop(0)
        if entry.kind in ("birth", "death", "position"):
            raise RuntimeError(f"{entry.kind} edit needs its slot to commit")

    def discard(self):
        for entry in reversed(self._pending):
            if entry.old_lam is not None:
                self.lam[entry.rows] = entry.old_lam
            if entry.old_eta is not None:
                self.eta[entry.rows] = entry.old_eta
            self.ll[entry.rows] = entry.old_ll
        self._pending.clear()

    @property
    def has_pending(self) -> bool:
        return bool(self._pending)
