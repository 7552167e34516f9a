"""Reversible-jump moves on per-component AR orders.

Each iteration picks one component k uniformly at random and proposes either
a birth (append a coefficient drawn uniformly on (-w, w), default w = 1.5) or
a death (drop the last coefficient).  Birth is proposed with probability
b(p_k), death with d(p_k) = 1 - b(p_k); d(1) = 0 and b(p_max) = 0, both 1/2
in between.  The Jacobian of the identity mapping is one, so the acceptance
probability is the allocated-point likelihood ratio times the move/proposal
ratio:

    birth:  min{1, LR * [d(p_k + 1) / b(p_k)] * 2w}
    death:  min{1, LR * [b(p_k - 1) / d(p_k)] * q(dropped)}

where q is the birth proposal density, the exact mirror of the birth move
(q(x) = 1/(2w) on (-w, w), zero outside).  A variant replacing q(dropped) by
the constant normal proposal density at zero, phi(0) * sqrt(gamma_k), is
available behind OrderMoveConfig(literal_death_density=True).  Candidates
that leave the stability region are rejected outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import MARSpec, TimeSeries
from .sampler import (
    ChainOutput,
    ChainState,
    Hyperparams,
    _design,
    gibbs_sweep,
    initial_state,
    log_prior_density,
    tune_gamma,
)
from .stability import is_stable


@dataclass(frozen=True)
class OrderMoveConfig:
    p_max: int = 5
    birth_half_width: float = 1.5
    literal_death_density: bool = False

    def __post_init__(self):
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if not (np.isfinite(self.birth_half_width) and self.birth_half_width > 0):
            raise ValueError("birth_half_width must be positive")

    def birth_prob(self, p: int) -> float:
        """b(p): 1 at p=1, 0 at p_max, 1/2 in between."""
        if not 1 <= p <= self.p_max:
            raise ValueError(f"order {p} outside 1..{self.p_max}")
        if p == self.p_max:
            return 0.0
        if p == 1:
            return 1.0
        return 0.5

    def death_prob(self, p: int) -> float:
        return 1.0 - self.birth_prob(p)


def propose_order_move(
    state: ChainState, config: OrderMoveConfig, k: int, rng: np.random.Generator
) -> str:
    """Draw the move direction for component k: "birth" or "death"."""
    p = state.spec.orders[k - 1]
    if config.p_max == 1:
        return "none"
    return "birth" if rng.random() < config.birth_prob(p) else "death"


def _component_sse(yt, lm, mask, shift, coeffs) -> float:
    e = yt[mask] - shift - lm[mask, : coeffs.size] @ coeffs
    return float(e @ e)


def _order_log_lr(state: ChainState, yt, lm, k: int, new_coeffs: np.ndarray) -> float:
    """Log likelihood ratio restricted to points allocated to component k."""
    spec = state.spec
    mask = state.alloc.z == k
    if not mask.any():
        return 0.0
    shift = spec.shifts[k - 1]
    tau = 1.0 / spec.scales[k - 1] ** 2
    sse_new = _component_sse(yt, lm, mask, shift, new_coeffs)
    sse_cur = _component_sse(yt, lm, mask, shift, spec.ar_coeffs[k - 1])
    return -0.5 * tau * (sse_new - sse_cur)


def _candidate_spec(spec: MARSpec, k: int, new_coeffs: np.ndarray) -> MARSpec:
    ar = list(spec.ar_coeffs)
    ar[k - 1] = new_coeffs
    return MARSpec(
        weights=spec.weights, shifts=spec.shifts, ar_coeffs=tuple(ar), scales=spec.scales
    )


def birth_acceptance(
    state: ChainState,
    series: TimeSeries,
    config: OrderMoveConfig,
    k: int,
    proposed_coeff: float,
    cond: int | None = None,
) -> float:
    """Acceptance probability of appending proposed_coeff to component k."""
    spec = state.spec
    p = spec.orders[k - 1]
    if p >= config.p_max:
        raise ValueError(f"component {k} already at p_max={config.p_max}")
    cond = config.p_max if cond is None else cond
    yt, lm = _design(series.values, cond)
    new_coeffs = np.append(spec.ar_coeffs[k - 1], proposed_coeff)
    if not is_stable(_candidate_spec(spec, k, new_coeffs)).stable:
        return 0.0
    log_lr = _order_log_lr(state, yt, lm, k, new_coeffs)
    ratio = config.death_prob(p + 1) / config.birth_prob(p)
    log_alpha = log_lr + math.log(ratio) + math.log(2.0 * config.birth_half_width)
    return min(1.0, math.exp(min(log_alpha, 0.0)))


def death_acceptance(
    state: ChainState,
    series: TimeSeries,
    config: OrderMoveConfig,
    k: int,
    cond: int | None = None,
    gamma_k: float | None = None,
) -> float:
    """Acceptance probability of dropping the last coefficient of component k."""
    spec = state.spec
    p = spec.orders[k - 1]
    if p <= 1:
        raise ValueError(f"component {k} already at order 1")
    cond = config.p_max if cond is None else cond
    yt, lm = _design(series.values, cond)
    dropped = float(spec.ar_coeffs[k - 1][-1])
    new_coeffs = spec.ar_coeffs[k - 1][:-1].copy()
    if not is_stable(_candidate_spec(spec, k, new_coeffs)).stable:
        return 0.0
    if config.literal_death_density:
        if gamma_k is None:
            raise ValueError("the literal death density needs the RWM proposal precision")
        dens = math.sqrt(gamma_k / (2.0 * math.pi))
    else:
        w = config.birth_half_width
        dens = 1.0 / (2.0 * w) if abs(dropped) < w else 0.0
    if dens == 0.0:
        return 0.0
    log_lr = _order_log_lr(state, yt, lm, k, new_coeffs)
    ratio = config.birth_prob(p - 1) / config.death_prob(p)
    log_alpha = log_lr + math.log(ratio) + math.log(dens)
    return min(1.0, math.exp(min(log_alpha, 0.0)))


@dataclass(frozen=True)
class OrderMoveResult:
    direction: str
    k: int
    alpha: float
    accepted: bool


def order_move(
    state: ChainState,
    series: TimeSeries,
    config: OrderMoveConfig,
    k: int,
    rng: np.random.Generator,
    cond: int | None = None,
    gamma_k: float | None = None,
) -> tuple[ChainState, OrderMoveResult]:
    """One birth/death move on component k; allocations are kept as they are."""
    direction = propose_order_move(state, config, k, rng)
    if direction == "none":
        return state, OrderMoveResult("none", k, 0.0, False)
    if direction == "birth":
        u = rng.uniform(-config.birth_half_width, config.birth_half_width)
        alpha = birth_acceptance(state, series, config, k, u, cond)
        new_coeffs = np.append(state.spec.ar_coeffs[k - 1], u)
    else:
        alpha = death_acceptance(state, series, config, k, cond, gamma_k)
        new_coeffs = state.spec.ar_coeffs[k - 1][:-1].copy()
    accepted = rng.random() < alpha
    if accepted:
        state = ChainState(
            spec=_candidate_spec(state.spec, k, new_coeffs),
            alloc=state.alloc,
            lam=state.lam,
            iteration=state.iteration,
            means=state.means,
        )
    return state, OrderMoveResult(direction, k, alpha, accepted)


@dataclass
class OrderTrace:
    """Per-iteration retained order vectors and their visit counts."""

    orders: np.ndarray
    counts: dict[tuple[int, ...], int]
    birth_attempts: int = 0
    birth_accepts: int = 0
    death_attempts: int = 0
    death_accepts: int = 0

    @property
    def total(self) -> int:
        return self.orders.shape[0]

    def modal(self) -> tuple[int, ...]:
        """Most visited order configuration; ties resolve lexicographically."""
        if not self.counts:
            raise ValueError("empty trace")
        return min(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    def preference(self, orders: tuple[int, ...]) -> float:
        """Share of retained iterations spent at the given configuration."""
        return self.counts.get(tuple(int(p) for p in orders), 0) / self.total


def rjmcmc_run(
    series: TimeSeries,
    g: int,
    hyper: Hyperparams,
    config: OrderMoveConfig,
    seed: int,
    start_orders: tuple[int, ...] | None = None,
) -> tuple[OrderTrace, ChainOutput]:
    """Joint chain over parameters and orders.

    Every likelihood inside the run conditions on the first p_max
    observations so states of different dimension share one data set.  One
    order move on a uniformly chosen component follows each parameter sweep.
    """
    rng = np.random.default_rng(seed)
    cond = config.p_max
    orders0 = tuple([1] * g) if start_orders is None else tuple(int(p) for p in start_orders)
    if len(orders0) != g or any(not 1 <= p <= config.p_max for p in orders0):
        raise ValueError("start orders must lie in 1..p_max for every component")
    state = initial_state(series, g, orders0, hyper, rng, cond)
    if hyper.gamma is not None:
        gamma = np.asarray(hyper.gamma, dtype=float)
    else:
        gamma, _, state = tune_gamma(
            series, g, orders0, hyper, hyper.pilot_iters, rng, state=state, cond=cond
        )

    n_keep = hyper.n_iter - hyper.burn_in
    width = config.p_max
    weights = np.empty((n_keep, g))
    shifts = np.empty((n_keep, g))
    means = np.empty((n_keep, g))
    scales = np.empty((n_keep, g))
    ar = np.zeros((n_keep, g, width))
    orders_arr = np.empty((n_keep, g), dtype=np.int64)
    lam = np.empty(n_keep)
    ll = np.empty(n_keep)
    lp = np.empty(n_keep)
    counts: dict[tuple[int, ...], int] = {}
    acc_counts = np.zeros(g)
    stab_rej = 0
    ba = bacc = da = dacc = 0

    yt, lm = _design(series.values, cond)
    j = 0
    for it in range(hyper.n_iter):
        state, info = gibbs_sweep(state, series, hyper, rng, cond=cond, gamma=gamma)
        acc_counts += info.accepted
        stab_rej += int(info.stability_rejected)
        k = int(rng.integers(1, g + 1))
        state, move = order_move(state, series, config, k, rng, cond, gamma[k - 1])
        if move.direction == "birth":
            ba += 1
            bacc += int(move.accepted)
        elif move.direction == "death":
            da += 1
            dacc += int(move.accepted)
        if it >= hyper.burn_in:
            spec = state.spec
            cur_orders = spec.orders
            counts[cur_orders] = counts.get(cur_orders, 0) + 1
            orders_arr[j] = cur_orders
            weights[j] = spec.weights
            shifts[j] = spec.shifts
            means[j] = state.means
            scales[j] = spec.scales
            ar[j] = spec.phi_matrix(width)
            lam[j] = state.lam
            if move.accepted:
                from .sampler import _mixture_loglik

                ll[j] = _mixture_loglik(spec, yt, lm)
            else:
                ll[j] = info.log_likelihood
            lp[j] = ll[j] + log_prior_density(spec.weights, state.means, spec.scales, hyper)
            j += 1

    trace = OrderTrace(
        orders=orders_arr,
        counts=counts,
        birth_attempts=ba,
        birth_accepts=bacc,
        death_attempts=da,
        death_accepts=dacc,
    )
    output = ChainOutput(
        g=g,
        cond=cond,
        weights=weights,
        shifts=shifts,
        means=means,
        scales=scales,
        ar=ar,
        orders=orders_arr,
        lam=lam,
        log_likelihoods=ll,
        log_posteriors=lp,
        acceptance=acc_counts / hyper.n_iter,
        stability_rejections=stab_rej,
        gamma=gamma,
        seed=seed,
        burn_in=hyper.burn_in,
        fixed_shift=hyper.fixed_shift,
    )
    return trace, output
