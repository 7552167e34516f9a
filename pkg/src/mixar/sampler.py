"""Gibbs/Metropolis posterior sampler for MAR models.

The sampler targets the posterior under the prior structure

    pi ~ Dirichlet(1, ..., 1)
    mu_k ~ N(zeta, 1/kappa)          (component means; shifts phi_k0 = mu_k b_k)
    lambda ~ Gamma(a, b),  tau_k ~ Gamma(c, lambda)
    AR coefficient blocks ~ flat on the stability region

with one sweep updating, in order: allocations z, weights pi, means mu
(skipped for fixed-shift models), the precision hyperparameter lambda,
precisions tau, then a random-walk Metropolis step on each component's AR
coefficients.  A whole-model stability check is applied once per sweep: if
the end-of-sweep candidate is unstable the entire previous state is
restored.

Gamma distributions are parameterized by (shape, rate) throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .model import (
    LOG_2PI,
    LatentAllocation,
    MARSpec,
    TimeSeries,
    lag_matrix,
)
from .stability import is_stable


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants and run lengths.

    zeta, kappa: mean and precision of the component-mean prior.
    a, b: shape and rate of the Gamma prior on lambda.
    c: shape of the Gamma prior on the precisions tau_k.
    dirichlet_weights: Dirichlet prior weights (None means all ones).
    gamma: per-component RWM proposal precisions (None means tune a pilot).
    fixed_shift: pin all shifts phi_k0 at zero and skip the mean update.
    """

    zeta: float
    kappa: float
    b: float
    a: float = 0.2
    c: float = 2.0
    dirichlet_weights: tuple[float, ...] | None = None
    gamma: tuple[float, ...] | None = None
    fixed_shift: bool = False
    p_max: int = 5
    burn_in: int = 10_000
    n_iter: int = 20_000
    pilot_iters: int = 2_000

    def __post_init__(self):
        for name in ("kappa", "b", "a", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not np.isfinite(self.zeta):
            raise ValueError("zeta must be finite")
        if self.dirichlet_weights is not None:
            dw = tuple(float(x) for x in self.dirichlet_weights)
            if any(x <= 0 for x in dw):
                raise ValueError("dirichlet_weights must be positive")
            object.__setattr__(self, "dirichlet_weights", dw)
        if self.gamma is not None:
            gm = tuple(float(x) for x in self.gamma)
            if any(not (np.isfinite(x) and x > 0) for x in gm):
                raise ValueError("every gamma_k must be positive and finite")
            object.__setattr__(self, "gamma", gm)
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError(
                f"burn_in must satisfy 0 <= burn_in < n_iter, got {self.burn_in}, {self.n_iter}"
            )


def default_hyperparams(series: TimeSeries, **overrides) -> Hyperparams:
    """Data-driven defaults: zeta = min + R/2, kappa = 1/R, b = 10/R^2.

    R is the observed range; a = 0.2 and c = 2 are fixed.  Raises on a
    constant series (R = 0).
    """
    lo = float(series.values.min())
    hi = float(series.values.max())
    r = hi - lo
    if r <= 0:
        raise ValueError("series is constant; the data-driven prior scale is undefined")
    base = dict(zeta=lo + r / 2.0, kappa=1.0 / r, b=10.0 / r**2)
    base.update(overrides)
    return Hyperparams(**base)


@dataclass(frozen=True)
class ChainState:
    """One point of the chain: spec, allocations, lambda, sampled means."""

    spec: MARSpec
    alloc: LatentAllocation
    lam: float
    iteration: int
    means: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float).reshape(-1))
        if self.means.size != self.spec.g:
            raise ValueError("means must have one entry per component")


@dataclass(frozen=True)
class UpdateMask:
    """Which blocks a sweep updates; ar is a set of 1-based components (None = all)."""

    allocations: bool = True
    weights: bool = True
    means: bool = True
    lam: bool = True
    precisions: bool = True
    ar: frozenset[int] | None = None

    def ar_components(self, g: int) -> tuple[int, ...]:
        if self.ar is None:
            return tuple(range(1, g + 1))
        return tuple(sorted(k for k in self.ar if 1 <= k <= g))


@dataclass(frozen=True)
class SweepInfo:
    attempted: np.ndarray
    accepted: np.ndarray
    stability_rejected: bool
    log_likelihood: float


@dataclass
class ChainOutput:
    """Retained draws and run diagnostics of one chain.

    Arrays are indexed [draw, component(, lag)]; ar is zero-padded to a
    common width and `orders` gives per-draw component orders.
    """

    g: int
    cond: int
    weights: np.ndarray
    shifts: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    ar: np.ndarray
    orders: np.ndarray
    lam: np.ndarray
    log_likelihoods: np.ndarray
    log_posteriors: np.ndarray
    acceptance: np.ndarray | None
    stability_rejections: int
    gamma: np.ndarray | None
    seed: int | None
    burn_in: int
    fixed_shift: bool
    allocations: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.weights.shape[0]

    def spec_at(self, i: int) -> MARSpec:
        orders = self.orders[i]
        ar = tuple(self.ar[i, k, : orders[k]].copy() for k in range(self.g))
        return MARSpec(
            weights=self.weights[i].copy(),
            shifts=self.shifts[i].copy(),
            ar_coeffs=ar,
            scales=self.scales[i].copy(),
        )


def _dirichlet_prior(hyper: Hyperparams, g: int) -> np.ndarray:
    if hyper.dirichlet_weights is None:
        return np.ones(g)
    dw = np.asarray(hyper.dirichlet_weights, dtype=float)
    if dw.size != g:
        raise ValueError(f"dirichlet_weights has length {dw.size}, expected {g}")
    return dw


def _resolve_cond(spec: MARSpec, series: TimeSeries, cond: int | None) -> int:
    c = spec.max_order if cond is None else int(cond)
    if c < spec.max_order:
        raise ValueError("cond must be at least the maximum component order")
    if series.n <= c:
        raise ValueError(f"series of length {series.n} too short to condition on {c} values")
    return c


def _design(values: np.ndarray, cond: int) -> tuple[np.ndarray, np.ndarray]:
    """Target vector y_t and lag matrix for t = cond+1 .. n."""
    lm = lag_matrix(values, cond, cond + 1)
    return values[cond:], lm


def _log_alloc_weights(spec, yt, lm):
    """(T, g) matrix log(pi_k/sigma_k phi(e_tk/sigma_k)), unnormalized rows."""
    e = (yt[:, None] - spec.shifts[None, :] - lm @ spec.phi_matrix(lm.shape[1]).T) / spec.scales
    return np.log(spec.weights) - np.log(spec.scales) - 0.5 * e**2 - 0.5 * LOG_2PI


def allocation_probabilities(
    spec: MARSpec, series: TimeSeries, cond: int | None = None
) -> np.ndarray:
    """Posterior allocation probabilities, rows t = cond+1..n summing to one."""
    cond = _resolve_cond(spec, series, cond)
    yt, lm = _design(series.values, cond)
    logw = _log_alloc_weights(spec, yt, lm)
    norm = logsumexp(logw, axis=1)
    bad = ~np.isfinite(norm)
    if np.any(bad):
        t_bad = cond + 1 + int(np.nonzero(bad)[0][0])
        raise ValueError(
            f"all component densities underflow at t={t_bad}; "
            "the current parameters leave that observation unexplainable"
        )
    return np.exp(logw - norm[:, None])


def sample_allocations(
    state: ChainState, series: TimeSeries, rng: np.random.Generator, cond: int | None = None
) -> LatentAllocation:
    """Draw z_t from its full conditional at every conditioning time."""
    probs = allocation_probabilities(state.spec, series, cond)
    return _draw_alloc(probs, state.spec.g, rng)


def _draw_alloc(probs: np.ndarray, g: int, rng) -> LatentAllocation:
    u = rng.random(probs.shape[0])
    labels = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    labels = np.minimum(labels, g - 1)
    return LatentAllocation(z=labels + 1, g=g)


def sample_weights(
    alloc: LatentAllocation, rng: np.random.Generator, prior_weights: np.ndarray | None = None
) -> np.ndarray:
    """Draw pi from Dirichlet(prior + counts)."""
    pw = np.ones(alloc.g) if prior_weights is None else np.asarray(prior_weights, dtype=float)
    w = rng.dirichlet(pw + alloc.counts)
    w = np.clip(w, 1e-300, None)
    return w / w.sum()


def _draw_means(yt, lm, phi_mat, scales, z0, counts, hyper, rng):
    """Sample component means; returns (means, shifts).

    The conditional is Normal with precision tau_k n_k b_k^2 + kappa and mean
    (tau_k n_k ebar_k b_k + kappa zeta) / precision, where ebar_k averages the
    shift-free residuals y_t - sum_i phi_ki y_{t-i} over the points assigned
    to k and b_k = 1 - sum_i phi_ki.  Empty components fall back to the prior.
    """
    g = scales.size
    r = yt[:, None] - lm @ phi_mat.T
    tau = 1.0 / scales**2
    bk = 1.0 - phi_mat.sum(axis=1)
    means = np.empty(g)
    for k in range(g):
        nk = counts[k]
        ebar = r[z0 == k, k].mean() if nk > 0 else 0.0
        prec = tau[k] * nk * bk[k] ** 2 + hyper.kappa
        m = (tau[k] * nk * ebar * bk[k] + hyper.kappa * hyper.zeta) / prec
        means[k] = rng.normal(m, math.sqrt(1.0 / prec))
    return means, means * bk


def sample_means(
    state: ChainState,
    series: TimeSeries,
    hyper: Hyperparams,
    rng: np.random.Generator,
    cond: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw component means from their Normal full conditionals.

    Returns (shifts, means): the sampled means and the implied shifts
    phi_k0 = mu_k (1 - sum_i phi_ki).
    """
    cond = _resolve_cond(state.spec, series, cond)
    yt, lm = _design(series.values, cond)
    means, shifts = _draw_means(
        yt,
        lm,
        state.spec.phi_matrix(cond),
        state.spec.scales,
        state.alloc.z - 1,
        state.alloc.counts,
        hyper,
        rng,
    )
    return shifts, means


def sample_lambda(state: ChainState, hyper: Hyperparams, rng: np.random.Generator) -> float:
    """Draw lambda ~ Gamma(a + g c, b + sum_k tau_k)."""
    tau_sum = float(state.spec.precisions.sum())
    return float(rng.gamma(hyper.a + state.spec.g * hyper.c, 1.0 / (hyper.b + tau_sum)))


def _draw_precisions(e, z0, counts, lam, hyper, rng):
    g = counts.size
    scales = np.empty(g)
    for k in range(g):
        sse = float(np.sum(e[z0 == k, k] ** 2)) if counts[k] > 0 else 0.0
        tau = rng.gamma(hyper.c + counts[k] / 2.0, 1.0 / (lam + sse / 2.0))
        scales[k] = 1.0 / math.sqrt(tau)
    return scales


def sample_precisions(
    state: ChainState,
    series: TimeSeries,
    hyper: Hyperparams,
    rng: np.random.Generator,
    cond: int | None = None,
) -> np.ndarray:
    """Draw tau_k ~ Gamma(c + n_k/2, lambda + SSE_k/2); returns scales sigma_k."""
    cond = _resolve_cond(state.spec, series, cond)
    yt, lm = _design(series.values, cond)
    spec = state.spec
    e = yt[:, None] - spec.shifts[None, :] - lm @ spec.phi_matrix(cond).T
    return _draw_precisions(e, state.alloc.z - 1, state.alloc.counts, state.lam, hyper, rng)


def rwm_log_ratio(
    spec: MARSpec,
    series: TimeSeries,
    z: np.ndarray,
    k: int,
    proposal: np.ndarray,
    cond: int | None = None,
) -> float:
    """Log likelihood ratio of proposed vs current AR coefficients of component k.

    Restricted to observations currently allocated to k; the shift and scale
    stay at their current values.  z holds 1-based labels for t = cond+1..n.
    """
    cond = _resolve_cond(spec, series, cond)
    yt, lm = _design(series.values, cond)
    proposal = np.asarray(proposal, dtype=float).reshape(-1)
    cur = spec.ar_coeffs[k - 1]
    if proposal.size != cur.size:
        raise ValueError("proposal must match the component order")
    mask = np.asarray(z) == k
    if not mask.any():
        return 0.0
    x = lm[mask, : cur.size]
    resid_base = yt[mask] - spec.shifts[k - 1]
    e_cur = resid_base - x @ cur
    e_new = resid_base - x @ proposal
    tau = 1.0 / spec.scales[k - 1] ** 2
    return -0.5 * tau * float(e_new @ e_new - e_cur @ e_cur)


def rwm_update_ar(
    state: ChainState,
    series: TimeSeries,
    hyper: Hyperparams,
    k: int,
    rng: np.random.Generator,
    cond: int | None = None,
    gamma_k: float | None = None,
) -> tuple[bool, np.ndarray]:
    """One random-walk Metropolis step on component k's AR coefficients.

    The proposal is N(phi_k, I/gamma_k); acceptance uses the allocated-point
    likelihood ratio.  Returns (accepted, coefficient vector).
    """
    if gamma_k is None:
        if hyper.gamma is None:
            raise ValueError("no proposal precision available; tune gamma first or set it")
        gamma_k = hyper.gamma[k - 1]
    cur = state.spec.ar_coeffs[k - 1]
    step = rng.normal(0.0, 1.0 / math.sqrt(gamma_k), size=cur.size)
    proposal = cur + step
    log_ratio = rwm_log_ratio(state.spec, series, state.alloc.z, k, proposal, cond)
    if math.log(rng.random()) < log_ratio:
        return True, proposal
    return False, cur.copy()


def gibbs_sweep(
    state: ChainState,
    series: TimeSeries,
    hyper: Hyperparams,
    rng: np.random.Generator,
    cond: int | None = None,
    gamma: np.ndarray | None = None,
    update: UpdateMask | None = None,
) -> tuple[ChainState, SweepInfo]:
    """One full sweep over all blocks, with the whole-model stability veto.

    Order: allocations, weights, means (unless fixed_shift), lambda,
    precisions, RWM per component.  If the end-of-sweep candidate spec is
    unstable, the entire previous state is restored bit for bit.
    """
    spec0 = state.spec
    g = spec0.g
    cond = _resolve_cond(spec0, series, cond)
    update = update or UpdateMask()
    if gamma is None:
        if hyper.gamma is not None:
            gamma = np.asarray(hyper.gamma, dtype=float)
        elif update.ar_components(g):
            raise ValueError("no proposal precision available; tune gamma first or set it")
    yt, lm = _design(series.values, cond)
    width = lm.shape[1]
    attempted = np.zeros(g, dtype=bool)
    accepted = np.zeros(g, dtype=bool)

    # allocations
    if update.allocations:
        logw = _log_alloc_weights(spec0, yt, lm)
        norm = logsumexp(logw, axis=1)
        bad = ~np.isfinite(norm)
        if np.any(bad):
            t_bad = cond + 1 + int(np.nonzero(bad)[0][0])
            raise ValueError(
                f"all component densities underflow at t={t_bad}; "
                "the current parameters leave that observation unexplainable"
            )
        alloc = _draw_alloc(np.exp(logw - norm[:, None]), g, rng)
    else:
        alloc = state.alloc
    z0 = alloc.z - 1
    counts = alloc.counts

    weights = (
        sample_weights(alloc, rng, _dirichlet_prior(hyper, g))
        if update.weights
        else spec0.weights.copy()
    )

    phi_mat = spec0.phi_matrix(width)
    scales = spec0.scales
    if update.means and not hyper.fixed_shift:
        means, shifts = _draw_means(yt, lm, phi_mat, scales, z0, counts, hyper, rng)
    else:
        means, shifts = state.means.copy(), spec0.shifts.copy()

    lam = (
        float(rng.gamma(hyper.a + g * hyper.c, 1.0 / (hyper.b + (1.0 / scales**2).sum())))
        if update.lam
        else state.lam
    )

    e = yt[:, None] - shifts[None, :] - lm @ phi_mat.T
    if update.precisions:
        scales = _draw_precisions(e, z0, counts, lam, hyper, rng)
    else:
        scales = scales.copy()

    ar = [a.copy() for a in spec0.ar_coeffs]
    for k in update.ar_components(g):
        attempted[k - 1] = True
        pk = ar[k - 1].size
        step = rng.normal(0.0, 1.0 / math.sqrt(gamma[k - 1]), size=pk)
        proposal = ar[k - 1] + step
        mask = z0 == k - 1
        if mask.any():
            x = lm[mask, :pk]
            resid_base = yt[mask] - shifts[k - 1]
            e_cur = resid_base - x @ ar[k - 1]
            e_new = resid_base - x @ proposal
            tau = 1.0 / scales[k - 1] ** 2
            log_ratio = -0.5 * tau * float(e_new @ e_new - e_cur @ e_cur)
        else:
            log_ratio = 0.0
        if math.log(rng.random()) < log_ratio:
            accepted[k - 1] = True
            ar[k - 1] = proposal

    candidate = MARSpec(weights=weights, shifts=shifts, ar_coeffs=tuple(ar), scales=scales)
    if is_stable(candidate).stable:
        new_state = ChainState(candidate, alloc, lam, state.iteration + 1, means)
        rejected = False
    else:
        new_state = ChainState(spec0, state.alloc, state.lam, state.iteration + 1, state.means)
        rejected = True
    ll = _mixture_loglik(new_state.spec, yt, lm)
    return new_state, SweepInfo(attempted, accepted, rejected, ll)


def _mixture_loglik(spec: MARSpec, yt, lm) -> float:
    return float(np.sum(logsumexp(_log_alloc_weights(spec, yt, lm), axis=1)))


def log_prior_density(
    weights: np.ndarray,
    means: np.ndarray,
    scales: np.ndarray,
    hyper: Hyperparams,
    fixed_shift: bool | None = None,
) -> float:
    """Joint log prior of (pi, mu, tau) with lambda integrated out.

    The Dirichlet term is evaluated on the simplex, the precision block uses
    the analytic compound density from integrating Gamma(tau_k | c, lambda)
    against Gamma(lambda | a, b), and the flat stable-region prior on the AR
    blocks contributes zero.  The mean term is skipped for fixed-shift models.
    """
    g = weights.size
    fixed_shift = hyper.fixed_shift if fixed_shift is None else fixed_shift
    dw = _dirichlet_prior(hyper, g)
    lp = math.lgamma(float(dw.sum())) - float(np.sum([math.lgamma(x) for x in dw]))
    lp += float(np.dot(dw - 1.0, np.log(weights)))
    if not fixed_shift:
        lp += float(
            np.sum(
                -0.5 * math.log(2.0 * math.pi / hyper.kappa)
                - 0.5 * hyper.kappa * (np.asarray(means) - hyper.zeta) ** 2
            )
        )
    tau = 1.0 / np.asarray(scales) ** 2
    a, b, c = hyper.a, hyper.b, hyper.c
    lp += (
        math.lgamma(a + g * c)
        - math.lgamma(a)
        - g * math.lgamma(c)
        + a * math.log(b)
        + (c - 1.0) * float(np.log(tau).sum())
        - (a + g * c) * math.log(b + float(tau.sum()))
    )
    return lp


def initial_state(
    series: TimeSeries,
    g: int,
    orders: tuple[int, ...],
    hyper: Hyperparams,
    rng: np.random.Generator,
    cond: int | None = None,
) -> ChainState:
    """Deterministic-ish starting point for a chain.

    Weights 1/g; allocations by quantile-binning the residuals of a global
    AR(p) least-squares fit; means at the series mean; precisions at
    1/var(y); per-component AR coefficients by ridge least squares on the
    initial bins, shrunk toward zero until the whole model is stable.
    """
    if g < 1:
        raise ValueError("g must be >= 1")
    orders = tuple(int(p) for p in orders)
    if len(orders) != g or any(p < 1 for p in orders):
        raise ValueError("orders must give a positive order for every component")
    p = max(orders)
    c = p if cond is None else int(cond)
    if c < p or series.n <= c:
        raise ValueError("series too short for the requested orders/conditioning")
    values = series.values
    yt, lm = _design(values, c)

    x_full = np.column_stack([np.ones(yt.size), lm[:, :p]])
    beta, *_ = np.linalg.lstsq(x_full, yt, rcond=None)
    resid = yt - x_full @ beta
    edges = np.quantile(resid, np.linspace(0.0, 1.0, g + 1))[1:-1]
    z0 = np.searchsorted(edges, resid, side="right")
    z0 = np.clip(z0, 0, g - 1)

    ybar = float(values.mean())
    var = float(values.var())
    if var <= 0:
        raise ValueError("series is constant; cannot initialize the sampler")

    ytc = yt - ybar
    lmc = lm - ybar
    ar = []
    for k in range(g):
        pk = orders[k]
        mask = z0 == k
        if mask.sum() > pk + 1:
            x = lmc[mask, :pk]
            xtx = x.T @ x
            ridge = 0.01 * (np.trace(xtx) / pk + 1.0)
            coef = np.linalg.solve(xtx + ridge * np.eye(pk), x.T @ ytc[mask])
        else:
            coef = np.zeros(pk)
        ar.append(coef)

    weights = np.full(g, 1.0 / g)
    scales = np.full(g, math.sqrt(var))
    if hyper.fixed_shift:
        means = np.zeros(g)
        shifts = np.zeros(g)
    else:
        means = np.full(g, ybar)
        shifts = np.array([ybar * (1.0 - a.sum()) for a in ar])

    for _ in range(400):
        spec = MARSpec(weights=weights, shifts=shifts, ar_coeffs=tuple(ar), scales=scales)
        if is_stable(spec).stable:
            break
        ar = [a * 0.9 for a in ar]
        if not hyper.fixed_shift:
            shifts = np.array([ybar * (1.0 - a.sum()) for a in ar])
    else:
        raise RuntimeError("failed to find a stable starting point")

    alloc = LatentAllocation(z=z0 + 1, g=g)
    lam = hyper.a / hyper.b
    return ChainState(spec=spec, alloc=alloc, lam=lam, iteration=0, means=means)


def tune_gamma(
    series: TimeSeries,
    g: int,
    orders: tuple[int, ...],
    hyper: Hyperparams,
    pilot_iters: int,
    rng: np.random.Generator,
    state: ChainState | None = None,
    cond: int | None = None,
    target: float = 0.225,
    batch: int = 50,
) -> tuple[np.ndarray, np.ndarray, ChainState]:
    """Stochastic-approximation tuning of the RWM proposal precisions.

    Adjusts log gamma_k in batches toward the target acceptance rate
    (defaults aim at the 20-25% band) and freezes the result.  Returns the
    tuned gamma, the last observed batch acceptance rates and the pilot's
    final state so the main chain can continue from it.
    """
    if pilot_iters < 500:
        raise ValueError("pilot_iters must be at least 500")
    if state is None:
        state = initial_state(series, g, orders, hyper, rng, cond)
    gamma = (
        np.asarray(hyper.gamma, dtype=float).copy()
        if hyper.gamma is not None
        else np.full(g, 100.0)
    )
    log_gamma = np.log(gamma)
    n_batches = pilot_iters // batch
    rates = np.zeros(g)
    for bi in range(n_batches):
        acc = np.zeros(g)
        att = np.zeros(g)
        for _ in range(batch):
            state, info = gibbs_sweep(
                state, series, hyper, rng, cond=cond, gamma=np.exp(log_gamma)
            )
            acc += info.accepted
            att += info.attempted
        rates = acc / np.maximum(att, 1.0)
        step = 2.0 / math.sqrt(bi + 1.0)
        log_gamma = log_gamma - step * (rates - target)
        log_gamma = np.clip(log_gamma, math.log(1e-6), math.log(1e12))
    if np.any(rates <= 0.0) or np.any(rates >= 1.0):
        warnings.warn(
            f"pilot acceptance rates pinned at {rates}; proposal scales may be unusable",
            RuntimeWarning,
        )
    return np.exp(log_gamma), rates, state


def run_chain(
    series: TimeSeries,
    g: int,
    orders: tuple[int, ...],
    hyper: Hyperparams,
    seed: int,
    cond: int | None = None,
    collect_allocations: bool = False,
) -> ChainOutput:
    """Run a fixed-order chain: optional pilot tuning, burn-in, retention.

    Deterministic given the seed.  Retained draws carry the log likelihood
    and the joint log posterior (likelihood plus log prior) for downstream
    selection of high-density points.
    """
    rng = np.random.default_rng(seed)
    orders = tuple(int(p) for p in orders)
    p = max(orders)
    c = p if cond is None else int(cond)
    state = initial_state(series, g, orders, hyper, rng, c)
    if hyper.gamma is not None:
        gamma = np.asarray(hyper.gamma, dtype=float)
        if gamma.size != g:
            raise ValueError(f"gamma has length {gamma.size}, expected {g}")
    else:
        gamma, _, state = tune_gamma(
            series, g, orders, hyper, hyper.pilot_iters, rng, state=state, cond=c
        )

    n_keep = hyper.n_iter - hyper.burn_in
    width = p
    weights = np.empty((n_keep, g))
    shifts = np.empty((n_keep, g))
    means = np.empty((n_keep, g))
    scales = np.empty((n_keep, g))
    ar = np.zeros((n_keep, g, width))
    lam = np.empty(n_keep)
    ll = np.empty(n_keep)
    lp = np.empty(n_keep)
    allocs = np.empty((n_keep, series.n - c), dtype=np.int8) if collect_allocations else None
    orders_arr = np.tile(np.asarray(orders, dtype=np.int64), (n_keep, 1))

    acc_counts = np.zeros(g)
    stab_rej = 0
    j = 0
    for it in range(hyper.n_iter):
        state, info = gibbs_sweep(state, series, hyper, rng, cond=c, gamma=gamma)
        acc_counts += info.accepted
        stab_rej += int(info.stability_rejected)
        if it >= hyper.burn_in:
            spec = state.spec
            weights[j] = spec.weights
            shifts[j] = spec.shifts
            means[j] = state.means
            scales[j] = spec.scales
            for k in range(g):
                ar[j, k, : orders[k]] = spec.ar_coeffs[k]
            lam[j] = state.lam
            ll[j] = info.log_likelihood
            lp[j] = info.log_likelihood + log_prior_density(
                spec.weights, state.means, spec.scales, hyper
            )
            if collect_allocations:
                allocs[j] = state.alloc.z
            j += 1

    return ChainOutput(
        g=g,
        cond=c,
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
        allocations=allocs,
    )
