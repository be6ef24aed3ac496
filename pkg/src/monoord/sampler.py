"""Reversible-jump MCMC over envelope configurations.

Each iteration performs one dimension-change attempt (birth, death, or a
combined death-birth), one fixed-dimension move (position, joint level,
single level, or origin level), a conjugate Gibbs sweep over the process
intensities, and, for semi-parametric models, a random-walk sweep over the
linear coefficients and cluster effects plus a conjugate variance draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Configuration,
    level_bounds,
    mark_bounds,
    position_bounds,
    sample_mark_vector,
    sequential_log_density,
)
from .likelihood import Dataset, ModelSpec, ParametricState, SurvivalCache

DIM_MOVES = ("birth", "death", "death_birth")
FIXED_MOVES = ("position", "joint_level", "single_level", "origin_level")


@dataclass
class SamplerConfig:
    """Run schedule, move weights and proposal tuning."""

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    birth_weight: float = 0.4
    death_weight: float = 0.4
    death_birth_weight: float = 0.2
    position_weight: float = 1.0
    joint_level_weight: float = 1.0
    single_level_weight: float = 1.0
    origin_level_weight: float = 1.0
    beta_scale: float = 0.1
    gamma_scale: float = 0.1
    adapt: bool = True
    mark_max_tries: int = 10_000

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.burn_in < 0:
            raise ValueError("burn-in must be non-negative")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        dim = (self.birth_weight, self.death_weight, self.death_birth_weight)
        fixed = (
            self.position_weight,
            self.joint_level_weight,
            self.single_level_weight,
            self.origin_level_weight,
        )
        if any(w < 0 for w in dim + fixed):
            raise ValueError("move weights must be non-negative")
        if sum(dim) <= 0 or sum(fixed) <= 0:
            raise ValueError("each move block needs positive total weight")


@dataclass
class SampleRecord:
    """One thinned posterior draw, reconstructable into a Configuration."""

    iteration: int
    counts: np.ndarray
    intensities: np.ndarray
    origin_marks: np.ndarray
    points: list[tuple[int, np.ndarray, np.ndarray]]
    loglik: float
    beta: np.ndarray
    gamma: np.ndarray
    tau2: float
    probs: np.ndarray | None = None

    def to_config(self, model: ModelSpec) -> Configuration:
        config = Configuration.from_points(
            model.n_covariates,
            model.n_categories,
            model.link.mark_space(),
            self.origin_marks,
            points=self.points,
            intensities=self.intensities,
        )
        return config


class MoveCounters:
    """Attempt/accept tallies per move kind."""

    def __init__(self):
        self.attempts = {m: 0 for m in DIM_MOVES + FIXED_MOVES + ("beta", "gamma")}
        self.accepts = dict(self.attempts)

    def record(self, move: str, accepted: bool):
        self.attempts[move] += 1
        if accepted:
            self.accepts[move] += 1

    def rates(self) -> dict[str, float]:
        return {
            m: self.accepts[m] / a if (a := self.attempts[m]) else float("nan")
            for m in self.attempts
        }


@dataclass
class ChainState:
    config: Configuration
    theta: ParametricState
    cache: SurvivalCache | None
    counters: MoveCounters = field(default_factory=MoveCounters)
    iteration: int = 0


# -- acceptance-ratio factors (pure, for direct testing) ---------------------


def birth_log_factor(rho: float, volume: float, n: int) -> float:
    return math.log(rho * volume) - math.log(n + 1)


def death_log_factor(rho: float, volume: float, n: int) -> float:
    return math.log(n) - math.log(rho * volume)


def death_birth_log_factor(
    rho_death: float, vol_death: float, n_death: int,
    rho_birth: float, vol_birth: float, n_birth: int,
) -> float:
    return (
        math.log(rho_birth * vol_birth)
        + math.log(n_death)
        - math.log(rho_death * vol_death)
        - math.log(n_birth + 1)
    )


def _accept(rng: np.random.Generator, log_alpha: float) -> bool:
    if log_alpha >= 0.0:
        return True
    return math.log(rng.random()) < log_alpha


# -- individual moves ---------------------------------------------------------


def _draw_location(
    config: Configuration, sub_idx: int, rng: np.random.Generator
) -> np.ndarray:
    mask = config.subspaces[sub_idx].mask
    loc = np.zeros(config.p)
    loc[list(mask)] = rng.random(len(mask))
    return loc


def _birth_proposal(
    state: ChainState, rng: np.random.Generator, sub_idx: int, cfg: SamplerConfig,
    exclude_slot: int | None = None,
):
    """Location, marks and likelihood delta for a prospective new point.

    Returns None when the mark sampler had to fall back: the fallback draw
    is not distributed as the conditional prior and the birth ratio cannot
    absorb the correction, so the attempt is abandoned (counted as a
    rejection; unreachable for realistic level counts).
    """
    config = state.config
    loc = _draw_location(config, sub_idx, rng)
    draw = sample_mark_vector(
        config, loc, rng, exclude_slot=exclude_slot, max_tries=cfg.mark_max_tries
    )
    if draw.fallback:
        return None
    if state.cache is not None:
        dom = state.cache.dominated_mask(loc)
        dll = state.cache.propose_birth(dom, draw.marks)
    else:
        dom = None
        dll = 0.0
    return loc, draw.marks, dom, dll


def birth_move(state: ChainState, rng: np.random.Generator, cfg: SamplerConfig) -> bool:
    config = state.config
    sub_idx = int(rng.integers(config.n_subspaces))
    proposal = _birth_proposal(state, rng, sub_idx, cfg)
    if proposal is None:
        state.counters.record("birth", False)
        return False
    loc, marks, dom, dll = proposal
    n = len(config.slots_in_subspace(sub_idx))
    vol = config.subspaces[sub_idx].volume
    log_alpha = dll + birth_log_factor(config.intensities[sub_idx], vol, n)
    accepted = _accept(rng, log_alpha)
    if accepted:
        slot = config.add_point(sub_idx, loc, marks)
        if state.cache is not None:
            state.cache.commit_birth(slot)
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("birth", accepted)
    return accepted


def death_move(state: ChainState, rng: np.random.Generator, cfg: SamplerConfig) -> bool:
    config = state.config
    sub_idx = int(rng.integers(config.n_subspaces))
    slots = config.slots_in_subspace(sub_idx)
    n = len(slots)
    if n == 0:
        state.counters.record("death", False)
        return False
    victim = slots[int(rng.integers(n))]
    dll = state.cache.propose_death(victim) if state.cache is not None else 0.0
    vol = config.subspaces[sub_idx].volume
    log_alpha = dll + death_log_factor(config.intensities[sub_idx], vol, n)
    accepted = _accept(rng, log_alpha)
    if accepted:
        config.remove_point(victim)
        if state.cache is not None:
            state.cache.commit_death(victim)
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("death", accepted)
    return accepted


def death_birth_move(
    state: ChainState, rng: np.random.Generator, cfg: SamplerConfig
) -> bool:
    config = state.config
    s = config.n_subspaces
    if s < 2:
        state.counters.record("death_birth", False)
        return False
    sub_d = int(rng.integers(s))
    sub_b = int(rng.integers(s - 1))
    if sub_b >= sub_d:
        sub_b += 1
    slots = config.slots_in_subspace(sub_d)
    n_d = len(slots)
    if n_d == 0:
        state.counters.record("death_birth", False)
        return False
    victim = slots[int(rng.integers(n_d))]
    dll_d = state.cache.propose_death(victim) if state.cache is not None else 0.0
    proposal = _birth_proposal(state, rng, sub_b, cfg, exclude_slot=victim)
    if proposal is None:
        if state.cache is not None:
            state.cache.discard()
        state.counters.record("death_birth", False)
        return False
    loc, marks, dom, dll_b = proposal
    n_b = len(config.slots_in_subspace(sub_b))
    log_alpha = (
        dll_d
        + dll_b
        + death_birth_log_factor(
            config.intensities[sub_d], config.subspaces[sub_d].volume, n_d,
            config.intensities[sub_b], config.subspaces[sub_b].volume, n_b,
        )
    )
    accepted = _accept(rng, log_alpha)
    if accepted:
        config.remove_point(victim)
        if state.cache is not None:
            state.cache.commit_death(victim)
        slot = config.add_point(sub_b, loc, marks)
        if state.cache is not None:
            state.cache.commit_birth(slot)
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("death_birth", accepted)
    return accepted


def _pick_slot(config: Configuration, rng: np.random.Generator) -> int | None:
    slots = config.alive_slots()
    if slots.size == 0:
        return None
    return int(slots[int(rng.integers(slots.size))])


def position_move(
    state: ChainState, rng: np.random.Generator, cfg: SamplerConfig
) -> bool:
    config = state.config
    slot = _pick_slot(config, rng)
    if slot is None:
        state.counters.record("position", False)
        return False
    mask = config.subspaces[config.subspace_of(slot)].mask
    intervals = position_bounds(config, slot)
    new_loc = config.location(slot).copy()
    u = rng.random(len(mask))
    for m, itv, um in zip(mask, intervals, u):
        new_loc[m] = itv.lower + itv.width * um
    if state.cache is not None:
        new_dom = state.cache.dominated_mask(new_loc)
        dll = state.cache.propose_position(slot, new_dom)
    else:
        dll = 0.0
    accepted = _accept(rng, dll)
    if accepted:
        config.set_location(slot, new_loc)
        if state.cache is not None:
            state.cache.commit_position(slot)
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("position", accepted)
    return accepted


def joint_level_move(
    state: ChainState, rng: np.random.Generator, cfg: SamplerConfig
) -> bool:
    config = state.config
    slot = _pick_slot(config, rng)
    if slot is None:
        state.counters.record("joint_level", False)
        return False
    loc = config.location(slot)
    draw = sample_mark_vector(
        config, loc, rng, exclude_slot=slot, max_tries=cfg.mark_max_tries
    )
    correction = 0.0
    if draw.fallback:
        lower, upper = mark_bounds(config, loc, exclude_slot=slot)
        reverse = sequential_log_density(lower, upper, config.marks(slot))
        correction = reverse - draw.log_density
    if state.cache is not None:
        dll = state.cache.propose_marks(slot, draw.marks)
    else:
        dll = 0.0
    accepted = _accept(rng, dll + correction)
    if accepted:
        config.set_marks(slot, draw.marks)
        if state.cache is not None:
            state.cache.commit_plain()
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("joint_level", accepted)
    return accepted


def _movable_levels(config: Configuration) -> tuple[int, int]:
    """Level index range (1-based, inclusive) the level moves may touch.

    Level 1 is pinned by definition under the identity link and forced to
    the upper range end by origin domination under a link, so moves start
    at level 2 in both cases.
    """
    return 2, config.n_levels


def single_level_move(
    state: ChainState, rng: np.random.Generator, cfg: SamplerConfig
) -> bool:
    config = state.config
    slot = _pick_slot(config, rng)
    if slot is None:
        state.counters.record("single_level", False)
        return False
    lo_k, hi_k = _movable_levels(config)
    k = int(rng.integers(lo_k, hi_k + 1))
    marks = config.marks(slot)
    itv = level_bounds(
        config, config.location(slot), k, own_marks=marks, exclude_slot=slot
    )
    value = itv.lower + itv.width * rng.random()
    new_marks = marks.copy()
    new_marks[k - 1] = value
    if state.cache is not None:
        dll = state.cache.propose_marks(slot, new_marks)
    else:
        dll = 0.0
    accepted = _accept(rng, dll)
    if accepted:
        config.set_mark_level(slot, k, value)
        if state.cache is not None:
            state.cache.commit_plain()
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("single_level", accepted)
    return accepted


def origin_level_move(
    state: ChainState, rng: np.random.Generator, cfg: SamplerConfig, d: int
) -> bool:
    """Level move for the fixed origin point with the shrinkage prior.

    The proposal is Beta(1 + min(total points, d), 1) scaled to the interval
    the ordering constraints leave open; d = 0 reduces to the uniform draw
    of the ordinary single level move.
    """
    config = state.config
    lo_k, hi_k = _movable_levels(config)
    k = int(rng.integers(lo_k, hi_k + 1))
    itv = level_bounds(
        config,
        np.zeros(config.p),
        k,
        own_marks=config.origin.marks,
        include_origin=False,
    )
    shape = 1.0 + min(config.n_points, d)
    value = itv.lower + itv.width * rng.beta(shape, 1.0)
    new_origin = config.origin.marks.copy()
    new_origin[k - 1] = value
    if state.cache is not None:
        dll = state.cache.propose_origin(new_origin)
    else:
        dll = 0.0
    accepted = _accept(rng, dll)
    if accepted:
        config.set_origin_level(k, value)
        if state.cache is not None:
            state.cache.commit_plain()
    elif state.cache is not None:
        state.cache.discard()
    state.counters.record("origin_level", accepted)
    return accepted


# -- Gibbs and parametric blocks ----------------------------------------------


def gibbs_intensity(
    config: Configuration, rng: np.random.Generator, a: float, b: float
) -> np.ndarray:
    """Redraw every process intensity from its conjugate Gamma posterior."""
    config.intensities = rng.gamma(a + config._counts, 1.0 / (b + config.volumes))
    return config.intensities


class _AdaptiveScale:
    """Robbins-Monro step-size adaptation toward a target acceptance rate."""

    def __init__(self, initial: float, n: int, target: float = 0.44):
        self.log_scale = np.full(n, math.log(initial)) if n else np.zeros(0)
        self.t = np.zeros(n)
        self.target = target

    def scale(self, j: int) -> float:
        return math.exp(self.log_scale[j])

    def update(self, j: int, accepted: bool):
        self.t[j] += 1.0
        step = self.t[j] ** -0.6
        self.log_scale[j] += step * ((1.0 if accepted else 0.0) - self.target)


def update_parametric(
    state: ChainState,
    rng: np.random.Generator,
    model: ModelSpec,
    beta_scales: _AdaptiveScale,
    gamma_scales: _AdaptiveScale,
    adapt: bool,
):
    """One sweep of random-walk M-H over beta and gamma plus the conjugate
    inverse-gamma draw for the cluster-effect variance."""
    cache = state.cache
    theta = state.theta
    if cache is None or theta.is_empty:
        return
    for j in range(theta.beta.size):
        prop = theta.beta[j] + beta_scales.scale(j) * rng.standard_normal()
        dll = cache.propose_beta(j, prop)
        accepted = _accept(rng, dll)
        if accepted:
            theta.beta[j] = prop
            cache.commit_plain()
        else:
            cache.discard()
        state.counters.record("beta", accepted)
        if adapt:
            beta_scales.update(j, accepted)
    for c in range(1, theta.gamma.size + 1):
        cur = theta.gamma[c - 1]
        prop = cur + gamma_scales.scale(c - 1) * rng.standard_normal()
        dll = cache.propose_gamma(c, prop)
        log_prior = (cur * cur - prop * prop) / (2.0 * theta.tau2)
        accepted = _accept(rng, dll + log_prior)
        if accepted:
            theta.gamma[c - 1] = prop
            cache.commit_plain()
        else:
            cache.discard()
        state.counters.record("gamma", accepted)
        if adapt:
            gamma_scales.update(c - 1, accepted)
    if theta.gamma.size:
        theta.tau2 = draw_tau2(rng, model.tau2_shape, model.tau2_rate, theta.gamma)


def draw_tau2(
    rng: np.random.Generator, shape0: float, rate0: float, gamma: np.ndarray
) -> float:
    """Conjugate inverse-gamma draw for the cluster-effect variance."""
    shape = shape0 + gamma.size / 2.0
    rate = rate0 + float(np.sum(gamma**2)) / 2.0
    return 1.0 / rng.gamma(shape, 1.0 / rate)


# -- chain driver --------------------------------------------------------------


def initial_origin_marks(
    model: ModelSpec, rng: np.random.Generator
) -> np.ndarray:
    """Ordered draw for the origin levels of an empty configuration.

    Under a link the first level starts at the upper range end, which the
    domination constraints then propagate to every support point; under the
    identity link it is 1 by definition.
    """
    ms = model.link.mark_space()
    K = model.n_categories
    free = np.sort(rng.random(K - 1))[::-1] * (ms.upper - ms.lower) + ms.lower
    top = ms.pinned_first if ms.pinned_first is not None else ms.upper
    return np.concatenate([[top], free])


def initial_state(dataset: Dataset | None, model: ModelSpec, rng) -> ChainState:
    config = Configuration(
        model.n_covariates,
        model.n_categories,
        model.link.mark_space(),
        initial_origin_marks(model, rng),
    )
    config.intensities = rng.gamma(
        model.a, 1.0 / model.b, size=config.n_subspaces
    )
    if model.n_linear or model.n_clusters:
        theta = ParametricState(
            beta=np.zeros(model.n_linear), gamma=np.zeros(model.n_clusters)
        )
    else:
        theta = ParametricState.empty()
    cache = None
    if dataset is not None:
        dataset.check_labels(model.n_categories)
        if dataset.q != model.n_linear:
            raise ValueError("dataset and model disagree on linear covariates")
        if dataset.n_clusters != model.n_clusters:
            raise ValueError("dataset and model disagree on cluster count")
        if dataset.p != model.n_covariates:
            raise ValueError("dataset and model disagree on covariate count")
        cache = SurvivalCache(dataset, model.link, theta, config)
    return ChainState(config=config, theta=theta, cache=cache)


def _make_record(state: ChainState, it: int, emit_probs: bool) -> SampleRecord:
    config = state.config
    cache = state.cache
    return SampleRecord(
        iteration=it,
        counts=config.counts,
        intensities=config.intensities.copy(),
        origin_marks=config.origin.marks.copy(),
        points=config.flat_points(),
        loglik=cache.total_exact() if cache is not None else 0.0,
        beta=state.theta.beta.copy(),
        gamma=state.theta.gamma.copy(),
        tau2=state.theta.tau2,
        probs=cache.category_prob_matrix() if (emit_probs and cache) else None,
    )


def run_chain(
    dataset: Dataset | None,
    model: ModelSpec,
    cfg: SamplerConfig,
    *,
    emit_probs: bool = False,
    progress=None,
    progress_every: int = 10_000,
):
    """Generator over thinned post-burn-in sample records.

    ``dataset=None`` runs the chain against a flat likelihood, which samples
    the marked point process prior (the prior-check mode).  The stream is a
    deterministic function of (dataset, model, cfg).
    """
    rng = np.random.default_rng(cfg.seed)
    state = initial_state(dataset, model, rng)

    dim_w = np.array([cfg.birth_weight, cfg.death_weight, cfg.death_birth_weight])
    dim_cdf = np.cumsum(dim_w / dim_w.sum())
    fixed_w = np.array(
        [
            cfg.position_weight,
            cfg.joint_level_weight,
            cfg.single_level_weight,
            cfg.origin_level_weight,
        ]
    )
    fixed_cdf = np.cumsum(fixed_w / fixed_w.sum())

    beta_scales = _AdaptiveScale(cfg.beta_scale, model.n_linear)
    gamma_scales = _AdaptiveScale(cfg.gamma_scale, model.n_clusters)

    total = cfg.burn_in + cfg.iterations
    for it in range(1, total + 1):
        state.iteration = it
        adapt = cfg.adapt and it <= cfg.burn_in

        u = rng.random()
        if u < dim_cdf[0]:
            birth_move(state, rng, cfg)
        elif u < dim_cdf[1]:
            death_move(state, rng, cfg)
        else:
            death_birth_move(state, rng, cfg)

        u = rng.random()
        if u < fixed_cdf[0]:
            position_move(state, rng, cfg)
        elif u < fixed_cdf[1]:
            joint_level_move(state, rng, cfg)
        elif u < fixed_cdf[2]:
            single_level_move(state, rng, cfg)
        else:
            origin_level_move(state, rng, cfg, model.d)

        gibbs_intensity(state.config, rng, model.a, model.b)
        update_parametric(state, rng, model, beta_scales, gamma_scales, adapt)

        if progress is not None and it % progress_every == 0:
            loglik = state.cache.total() if state.cache is not None else 0.0
            progress(it, loglik, state.counters.rates())

        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            yield _make_record(state, it, emit_probs)


def collect_chain(dataset, model, cfg, **kwargs) -> list[SampleRecord]:
    return list(run_chain(dataset, model, cfg, **kwargs))
