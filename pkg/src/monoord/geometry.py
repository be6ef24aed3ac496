"""Marked point process configurations over the union of covariate subspaces.

The regression surfaces are piecewise-constant envelopes: each support point
carries an ordered vector of function levels (one per outcome category), and
the level-k surface at x is the maximum level-k mark over all points whose
completed location is componentwise dominated by x.  A fixed point at the
origin guarantees the envelope is defined everywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Absolute slack for floating-point constraint checks.  Envelope maxima are
# exact copies of marks, so anything beyond this indicates a logic error.
CONSTRAINT_SLACK = 1e-12

DEFAULT_P_MAX = 12

_REJECTION_BATCH = 64


class InvariantViolation(RuntimeError):
    """A configuration failed an ordering constraint that must always hold."""


@dataclass(frozen=True)
class SubspaceId:
    """One non-empty subset of covariate axes, with its domain volume.

    ``mask`` holds sorted 0-based covariate indices.  The domain of each
    subspace is a unit hypercube, so ``volume`` is 1 unless a caller scales
    the covariate space differently.
    """

    mask: tuple[int, ...]
    volume: float = 1.0

    def __post_init__(self):
        if len(self.mask) == 0:
            raise ValueError("subspace mask must be non-empty")
        if tuple(sorted(set(self.mask))) != self.mask:
            raise ValueError("subspace mask must be sorted and duplicate-free")
        if not self.volume > 0:
            raise ValueError("subspace volume must be positive")


@dataclass(frozen=True)
class MarkSpace:
    """Range A of the function levels, plus the pinned top level if any.

    Under the identity link A = [0, 1] and every level-1 mark equals 1 by
    definition.  Under a link the range is a finite interval and no level is
    pinned explicitly (the origin's level-1 mark, initialised at the upper
    end, pins everyone else's through the domination constraints).
    """

    lower: float
    upper: float
    pinned_first: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("mark range must be finite")
        if not self.lower < self.upper:
            raise ValueError("mark range must have positive width")
        if self.pinned_first is not None and not (
            self.lower <= self.pinned_first <= self.upper
        ):
            raise ValueError("pinned first level must lie in the mark range")

    @classmethod
    def unit(cls) -> "MarkSpace":
        return cls(0.0, 1.0, pinned_first=1.0)


@dataclass(frozen=True)
class BoundsInterval:
    """A closed interval [lower, upper]; degenerate intervals are allowed."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + CONSTRAINT_SLACK:
            raise InvariantViolation(
                f"empty bounds interval [{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return max(0.0, self.upper - self.lower)

    def contains(self, value: float, slack: float = CONSTRAINT_SLACK) -> bool:
        return self.lower - slack <= value <= self.upper + slack


@dataclass
class SupportPoint:
    """A completed location in [0,1]^p with its ordered mark vector."""

    subspace: SubspaceId
    location: np.ndarray
    marks: np.ndarray


@dataclass
class OriginPoint:
    """The fixed point at the origin; only its marks are free."""

    marks: np.ndarray


@dataclass(frozen=True)
class MarkDraw:
    """Result of sampling a mark vector from the constrained uniform prior.

    ``log_density`` is the log proposal density of the sequential fallback
    when it was used; rejection draws are exact and carry 0.
    """

    marks: np.ndarray
    attempts: int
    fallback: bool
    log_density: float = 0.0


def enumerate_subspaces(p: int, p_max: int = DEFAULT_P_MAX) -> list[SubspaceId]:
    """All 2^p - 1 non-empty covariate subsets, by cardinality then lexicographic."""
    if not 1 <= p <= p_max:
        raise ValueError(f"covariate count p={p} outside [1, {p_max}]")
    out = []
    for size in range(1, p + 1):
        for mask in itertools.combinations(range(p), size):
            out.append(SubspaceId(mask=mask))
    return out


def dominates(x1, x2) -> bool:
    """True iff x1 <= x2 componentwise (x1 is dominated by x2)."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"location length mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b))


class Configuration:
    """Mutable set of marked support points plus the fixed origin point.

    Point storage is slot-based: rows of the internal arrays are recycled
    through a free list, so a slot index stays valid for the lifetime of its
    point.  Counts and intensities are indexed by the position of the
    subspace in ``subspaces``.
    """

    def __init__(
        self,
        p: int,
        n_levels: int,
        mark_space: MarkSpace,
        origin_marks,
        p_max: int = DEFAULT_P_MAX,
    ):
        if n_levels < 1:
            raise ValueError("need at least one outcome level")
        self.p = p
        self.n_levels = n_levels
        self.mark_space = mark_space
        self.subspaces = enumerate_subspaces(p, p_max)
        self.intensities = np.ones(len(self.subspaces))
        origin_marks = np.asarray(origin_marks, dtype=float).copy()
        if origin_marks.shape != (n_levels,):
            raise ValueError("origin marks must have one entry per level")
        self.origin = OriginPoint(marks=origin_marks)

        cap = 16
        self._loc = np.zeros((cap, p))
        self._marks = np.zeros((cap, n_levels))
        self._sub = np.zeros(cap, dtype=np.int64)
        self._alive = np.zeros(cap, dtype=bool)
        self._free = list(range(cap - 1, -1, -1))
        self._slots_by_sub: list[list[int]] = [[] for _ in self.subspaces]
        self._mask_index = {sub.mask: i for i, sub in enumerate(self.subspaces)}
        self._counts = np.zeros(len(self.subspaces), dtype=np.int64)
        self.volumes = np.array([sub.volume for sub in self.subspaces])

    # -- construction -----------------------------------------------------

    @classmethod
    def from_points(
        cls,
        p: int,
        n_levels: int,
        mark_space: MarkSpace,
        origin_marks,
        points=(),
        intensities=None,
    ) -> "Configuration":
        config = cls(p, n_levels, mark_space, origin_marks)
        for sub_idx, location, marks in points:
            config.add_point(sub_idx, location, marks)
        if intensities is not None:
            intensities = np.asarray(intensities, dtype=float)
            if intensities.shape != config.intensities.shape:
                raise ValueError("intensity vector has wrong length")
            config.intensities = intensities.copy()
        return config

    # -- basic queries ----------------------------------------------------

    @property
    def n_subspaces(self) -> int:
        return len(self.subspaces)

    @property
    def counts(self) -> np.ndarray:
        return self._counts.copy()

    @property
    def n_points(self) -> int:
        return int(self._counts.sum())

    def subspace_index(self, mask) -> int:
        return self._mask_index[tuple(sorted(mask))]

    def alive_slots(self) -> np.ndarray:
        return np.flatnonzero(self._alive)

    def slots_in_subspace(self, sub_idx: int) -> list[int]:
        return self._slots_by_sub[sub_idx]

    def point(self, slot: int) -> SupportPoint:
        if not self._alive[slot]:
            raise KeyError(f"no point at slot {slot}")
        return SupportPoint(
            subspace=self.subspaces[self._sub[slot]],
            location=self._loc[slot].copy(),
            marks=self._marks[slot].copy(),
        )

    def location(self, slot: int) -> np.ndarray:
        return self._loc[slot]

    def marks(self, slot: int) -> np.ndarray:
        return self._marks[slot]

    def subspace_of(self, slot: int) -> int:
        return int(self._sub[slot])

    def points_by_subspace(self) -> list[list[SupportPoint]]:
        return [
            [self.point(slot) for slot in slots] for slots in self._slots_by_sub
        ]

    def iter_points(self):
        for slot in self.alive_slots():
            yield int(slot), self.point(int(slot))

    def flat_points(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        """Flattened (subspace index, location, marks) list, for serialization."""
        out = []
        for slots in self._slots_by_sub:
            for slot in slots:
                out.append(
                    (int(self._sub[slot]), self._loc[slot].copy(), self._marks[slot].copy())
                )
        return out

    # -- mutation ---------------------------------------------------------

    def _grow(self):
        cap = self._loc.shape[0]
        new_cap = cap * 2
        self._loc = np.vstack([self._loc, np.zeros((cap, self.p))])
        self._marks = np.vstack([self._marks, np.zeros((cap, self.n_levels))])
        self._sub = np.concatenate([self._sub, np.zeros(cap, dtype=np.int64)])
        self._alive = np.concatenate([self._alive, np.zeros(cap, dtype=bool)])
        self._free.extend(range(new_cap - 1, cap - 1, -1))

    def add_point(self, sub_idx: int, location, marks) -> int:
        location = np.asarray(location, dtype=float)
        marks = np.asarray(marks, dtype=float)
        if location.shape != (self.p,):
            raise ValueError("location must be a completed p-vector")
        if marks.shape != (self.n_levels,):
            raise ValueError("marks must have one entry per level")
        mask = self.subspaces[sub_idx].mask
        inactive = np.ones(self.p, dtype=bool)
        inactive[list(mask)] = False
        if np.any(location[inactive] != 0.0):
            raise ValueError("coordinates outside the subspace mask must be 0")
        if not self._free:
            self._grow()
        slot = self._free.pop()
        self._loc[slot] = location
        self._marks[slot] = marks
        self._sub[slot] = sub_idx
        self._alive[slot] = True
        self._slots_by_sub[sub_idx].append(slot)
        self._counts[sub_idx] += 1
        return slot

    def remove_point(self, slot: int):
        if not self._alive[slot]:
            raise KeyError(f"no point at slot {slot}")
        sub_idx = int(self._sub[slot])
        self._slots_by_sub[sub_idx].remove(slot)
        self._alive[slot] = False
        self._free.append(slot)
        self._counts[sub_idx] -= 1

    def set_marks(self, slot: int, marks):
        if not self._alive[slot]:
            raise KeyError(f"no point at slot {slot}")
        self._marks[slot] = np.asarray(marks, dtype=float)

    def set_mark_level(self, slot: int, k: int, value: float):
        if not self._alive[slot]:
            raise KeyError(f"no point at slot {slot}")
        self._marks[slot, k - 1] = value

    def set_location(self, slot: int, location):
        if not self._alive[slot]:
            raise KeyError(f"no point at slot {slot}")
        self._loc[slot] = np.asarray(location, dtype=float)

    def set_origin_marks(self, marks):
        marks = np.asarray(marks, dtype=float)
        if marks.shape != (self.n_levels,):
            raise ValueError("origin marks must have one entry per level")
        self.origin.marks = marks.copy()

    def set_origin_level(self, k: int, value: float):
        self.origin.marks[k - 1] = value


# -- envelope and bounds ---------------------------------------------------


def evaluate_lambda(config: Configuration, x, k: int) -> float:
    """Level-k surface at x: max level-k mark over points dominated by x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (config.p,):
        raise ValueError("x must be a p-vector")
    if not 1 <= k <= config.n_levels:
        raise ValueError(f"level k={k} outside 1..{config.n_levels}")
    best = float(config.origin.marks[k - 1])
    alive = config.alive_slots()
    if alive.size:
        dom = np.all(config._loc[alive] <= x, axis=1)
        if dom.any():
            best = max(best, float(config._marks[alive[dom], k - 1].max()))
    return best


def mark_bounds(
    config: Configuration,
    location,
    *,
    exclude_slot: int | None = None,
    include_origin: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Cross-point level bounds at a location, for all levels at once.

    Returns (lower, upper) arrays of length K.  Within-point ordering is not
    applied here; see ``level_bounds`` for the single-level interval that
    includes it.
    """
    x = np.ascontiguousarray(location, dtype=float)
    ms = config.mark_space
    lower = np.full(config.n_levels, ms.lower)
    upper = np.full(config.n_levels, ms.upper)
    if include_origin:
        # the origin is dominated by every location
        np.maximum(lower, config.origin.marks, out=lower)
        if np.all(x <= 0.0):
            np.minimum(upper, config.origin.marks, out=upper)
    alive = config.alive_slots()
    if alive.size:
        from ._kernels import cross_bounds

        exclude = -1 if exclude_slot is None else exclude_slot
        cross_bounds(config._loc, config._marks, alive, exclude, x, lower, upper)
    if np.any(lower > upper + CONSTRAINT_SLACK):
        raise InvariantViolation(
            f"empty mark bounds at location {x.tolist()}: "
            f"lower={lower.tolist()} upper={upper.tolist()}"
        )
    return lower, upper


def level_bounds(
    config: Configuration,
    location,
    k: int,
    *,
    own_marks=None,
    exclude_slot: int | None = None,
    include_origin: bool = True,
) -> BoundsInterval:
    """Interval the level-k mark of a point at ``location`` may occupy.

    ``own_marks`` supplies the point's current mark vector so the
    within-point ordering (levels k-1 above, k+1 below) participates; omit
    it to get the cross-point box only.
    """
    if not 1 <= k <= config.n_levels:
        raise ValueError(f"level k={k} outside 1..{config.n_levels}")
    lower, upper = mark_bounds(
        config, location, exclude_slot=exclude_slot, include_origin=include_origin
    )
    lo = float(lower[k - 1])
    hi = float(upper[k - 1])
    if own_marks is not None:
        own_marks = np.asarray(own_marks, dtype=float)
        if k < config.n_levels:
            lo = max(lo, float(own_marks[k]))
        if k > 1:
            hi = min(hi, float(own_marks[k - 2]))
    if lo > hi:
        if lo > hi + CONSTRAINT_SLACK:
            raise InvariantViolation(
                f"empty level bounds at level {k}: [{lo}, {hi}]"
            )
        hi = lo
    return BoundsInterval(lo, hi)


def position_bounds(config: Configuration, slot: int) -> list[BoundsInterval]:
    """Per active coordinate, the interval between the nearest neighbour
    coordinate values over all other points' completed locations, clipped
    to [0, 1]."""
    if not config._alive[slot]:
        raise KeyError(f"no point at slot {slot}")
    mask = config.subspaces[config.subspace_of(slot)].mask
    loc = config._loc[slot]
    others = config.alive_slots()
    others = others[others != slot]
    out = []
    for m in mask:
        v = loc[m]
        lo, hi = 0.0, 1.0
        if others.size:
            col = config._loc[others, m]
            below = col[col <= v]
            above = col[col >= v]
            if below.size:
                lo = max(lo, float(below.max()))
            if above.size:
                hi = min(hi, float(above.min()))
        out.append(BoundsInterval(lo, hi))
    return out


def sequential_log_density(lower, upper, marks) -> float:
    """Log density of ``marks`` under the level-by-level fallback proposal.

    The fallback draws level k uniformly on [lower_k, min(upper_k, v_{k-1})];
    degenerate levels are point masses contributing no density factor.
    Returns -inf if the vector is outside the proposal's support.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    marks = np.asarray(marks, dtype=float)
    logq = 0.0
    prev = math.inf
    for k in range(lower.size):
        hi = min(float(upper[k]), prev)
        lo = float(lower[k])
        v = float(marks[k])
        width = hi - lo
        if width <= 0.0:
            if abs(v - lo) > CONSTRAINT_SLACK:
                return -math.inf
        else:
            if not (lo - CONSTRAINT_SLACK <= v <= hi + CONSTRAINT_SLACK):
                return -math.inf
            logq -= math.log(width)
        prev = v
    return logq


def sample_mark_vector(
    config: Configuration,
    location,
    rng: np.random.Generator,
    *,
    exclude_slot: int | None = None,
    max_tries: int = 10_000,
) -> MarkDraw:
    """Draw a mark vector uniformly on the region satisfying both the
    cross-point bounds at ``location`` and the within-point ordering.

    Rejection from independent uniforms on the per-level boxes; after
    ``max_tries`` rejected draws, falls back to sequential conditional
    sampling whose log density is reported so the enclosing move can
    correct its acceptance ratio.
    """
    lower, upper = mark_bounds(config, location, exclude_slot=exclude_slot)
    width = upper - lower
    degenerate = width <= 0.0
    attempts = 0
    while attempts < max_tries:
        batch = min(_REJECTION_BATCH, max_tries - attempts)
        cand = lower + rng.random((batch, lower.size)) * width
        if degenerate.any():
            cand[:, degenerate] = lower[degenerate]
        ordered = np.all(np.diff(cand, axis=1) <= 0.0, axis=1)
        hits = np.flatnonzero(ordered)
        if hits.size:
            attempts += int(hits[0]) + 1
            return MarkDraw(marks=cand[hits[0]], attempts=attempts, fallback=False)
        attempts += batch

    # Sequential fallback: always feasible because the per-level bounds of a
    # valid configuration are monotone in k.
    marks = np.empty(lower.size)
    logq = 0.0
    prev = math.inf
    for k in range(lower.size):
        hi = min(float(upper[k]), prev)
        lo = float(lower[k])
        if hi < lo:
            if lo - hi > CONSTRAINT_SLACK:
                raise InvariantViolation(
                    f"infeasible sequential mark draw at level {k + 1}"
                )
            hi = lo
        w = hi - lo
        if w <= 0.0:
            marks[k] = lo
        else:
            marks[k] = lo + w * rng.random()
            logq -= math.log(w)
        prev = marks[k]
    return MarkDraw(marks=marks, attempts=attempts, fallback=True, log_density=logq)


def validate(config: Configuration, slack: float = CONSTRAINT_SLACK) -> list[str]:
    """Check every structural invariant; returns one message per violation."""
    violations: list[str] = []
    ms = config.mark_space
    K = config.n_levels
    origin = config.origin.marks

    if ms.pinned_first is not None and abs(origin[0] - ms.pinned_first) > slack:
        violations.append(
            f"origin level 1 is {origin[0]}, must equal {ms.pinned_first}"
        )
    if np.any(origin < ms.lower - slack) or np.any(origin > ms.upper + slack):
        violations.append("origin marks outside the mark range")
    if np.any(np.diff(origin) > slack):
        violations.append("origin marks increase in k")

    if np.any(config.intensities <= 0.0):
        violations.append("non-positive intensity")

    slots = config.alive_slots()
    labels = ["origin"] + [f"slot {int(s)}" for s in slots]
    locs = np.vstack([np.zeros(config.p), config._loc[slots]]) if slots.size else np.zeros((1, config.p))
    marks = np.vstack([origin, config._marks[slots]]) if slots.size else origin[None, :]

    for s in slots:
        s = int(s)
        mask = config.subspaces[config.subspace_of(s)].mask
        loc = config._loc[s]
        inactive = np.ones(config.p, dtype=bool)
        inactive[list(mask)] = False
        if np.any(loc[inactive] != 0.0):
            violations.append(f"slot {s}: inactive coordinate is non-zero")
        if np.any(loc < 0.0) or np.any(loc > 1.0):
            violations.append(f"slot {s}: location outside the unit cube")
        m = config._marks[s]
        if np.any(m < ms.lower - slack) or np.any(m > ms.upper + slack):
            violations.append(f"slot {s}: mark outside the range")
        bad = np.flatnonzero(np.diff(m) > slack)
        for k in bad:
            violations.append(
                f"slot {s}: marks increase from level {k + 1} to {k + 2}"
            )

    # cross-point: whenever one completed location dominates another, the
    # dominated point's marks must not exceed the dominating point's
    n = locs.shape[0]
    if n > 1:
        dom = np.all(locs[:, None, :] <= locs[None, :, :], axis=2)
        np.fill_diagonal(dom, False)
        over = (marks[:, None, :] > marks[None, :, :] + slack).any(axis=2)
        bad_q, bad_p = np.nonzero(dom & over)
        for q, p in zip(bad_q, bad_p):
            levels = np.flatnonzero(marks[q] > marks[p] + slack) + 1
            violations.append(
                f"{labels[q]} dominated by {labels[p]} but exceeds it at "
                f"level(s) {levels.tolist()}"
            )
    return violations
