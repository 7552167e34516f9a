"""Marginal likelihood estimation and component-count selection.

The evidence of a g-component model is assembled from the identity

    f(y|g) = f(y|theta*, p*, g) p(theta*|p*, g) p(p*|g)
             / [ p(theta*|p*, y, g) p(p*|y, g) ]

evaluated at a high-density retained point theta*.  The posterior ordinate
factorizes, in this fixed order, as

    p(theta*|p*, y) = p(phi*|y) p(mu*|phi*, y) p(tau*|mu*, phi*, y)
                      p(pi*|tau*, mu*, phi*, y),

each factor estimated from a reduced Gibbs run with the earlier blocks
pinned at their starred values: the AR-block factors with the
Metropolis-within-Gibbs two-chain estimator (acceptance-weighted proposal
densities over the numerator chain, mean acceptance over a proposal-draw
chain), the remaining blocks by Rao-Blackwellized averages of their exact
full-conditional densities.  p(p*|y, g) is the visit share of the selected
order configuration in the order-move run, p(p*|g) is uniform over the
p_max^g configurations, and the prior over g is uniform over the candidate
range (stored separately, not folded into the evidence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.special import logsumexp

from .model import MARSpec, TimeSeries, log_likelihood, shift_from_mean
from .relabel import RelabelConfig, relabel_chain
from .rjmcmc import OrderMoveConfig, rjmcmc_run
from .sampler import (
    ChainOutput,
    ChainState,
    Hyperparams,
    UpdateMask,
    _design,
    _dirichlet_prior,
    allocation_probabilities,
    gibbs_sweep,
    log_prior_density,
    run_chain,
)
from .stability import is_stable

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EvidenceConfig:
    """Run lengths and settings for one evidence computation.

    orders pins the order configuration whose evidence is wanted (None uses
    the modal configuration of the order-move run; either way the visit
    share of that configuration supplies the order-posterior ordinate).
    """

    order_config: OrderMoveConfig = field(default_factory=OrderMoveConfig)
    n_j: int = 10_000
    n_i: int = 10_000
    reduced_burn_in: int = 500
    orders: tuple[int, ...] | None = None
    relabel: RelabelConfig = field(default_factory=RelabelConfig)

    def __post_init__(self):
        if self.n_j < 1 or self.n_i < 1:
            raise ValueError("n_j and n_i must be positive")
        if self.reduced_burn_in < 0:
            raise ValueError("reduced_burn_in must be nonnegative")


@dataclass(frozen=True)
class StarredPoint:
    """The evaluation point theta*: a spec plus the sampled means behind it.

    Shifts are re-derived as mu*_k (1 - sum_i phi*_ki) so the point is
    internally consistent regardless of within-sweep update order.
    """

    spec: MARSpec
    means: np.ndarray
    index: int


@dataclass
class EvidenceResult:
    g: int
    orders: tuple[int, ...]
    preference: float
    log_marginal: float
    parts: dict[str, float]
    theta_star: MARSpec
    theta_star_means: np.ndarray
    log_p_g: float | None = None

    def recompose(self) -> float:
        """Re-assemble log_marginal from parts (should match to ~1e-10)."""
        p = self.parts
        return (
            p["log_likelihood"]
            + p["log_prior"]
            + p["log_order_prior"]
            - p["log_phi_ordinate"]
            - p["log_mu_ordinate"]
            - p["log_tau_ordinate"]
            - p["log_pi_ordinate"]
            - p["log_order_posterior"]
        )


def theta_star_index(output: ChainOutput) -> int:
    """Index of the retained draw maximizing the stored joint log posterior."""
    if output.n_draws < 1:
        raise ValueError("empty chain output")
    return int(np.argmax(output.log_posteriors))


def select_theta_star(output: ChainOutput) -> MARSpec:
    """The retained draw with the highest joint log posterior (earliest tie)."""
    return output.spec_at(theta_star_index(output))


def starred_point(output: ChainOutput, index: int | None = None) -> StarredPoint:
    """Build the self-consistent evaluation point from a retained draw."""
    i = theta_star_index(output) if index is None else int(index)
    spec = output.spec_at(i)
    means = output.means[i].copy()
    if output.fixed_shift:
        shifts = np.zeros(output.g)
    else:
        shifts = np.array(
            [shift_from_mean(means[k], spec.ar_coeffs[k]) for k in range(output.g)]
        )
    spec = MARSpec(
        weights=spec.weights, shifts=shifts, ar_coeffs=spec.ar_coeffs, scales=spec.scales
    )
    if not is_stable(spec).stable:
        raise ValueError("the selected high-density draw is unstable; chain is corrupted")
    return StarredPoint(spec=spec, means=means, index=i)


def _start_state(
    star: StarredPoint, series: TimeSeries, hyper: Hyperparams, rng, cond: int
) -> ChainState:
    probs = allocation_probabilities(star.spec, series, cond)
    u = rng.random(probs.shape[0])
    labels = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    labels = np.minimum(labels, star.spec.g - 1)
    from .model import LatentAllocation

    alloc = LatentAllocation(z=labels + 1, g=star.spec.g)
    lam = float(
        rng.gamma(
            hyper.a + star.spec.g * hyper.c,
            1.0 / (hyper.b + float(star.spec.precisions.sum())),
        )
    )
    return ChainState(spec=star.spec, alloc=alloc, lam=lam, iteration=0, means=star.means)


def _reduced_loop(series, hyper, star, gamma, cond, n_keep, burn, rng, mask, record):
    state = _start_state(star, series, hyper, rng, cond)
    for i in range(burn + n_keep):
        state, _ = gibbs_sweep(state, series, hyper, rng, cond=cond, gamma=gamma, update=mask)
        if i >= burn:
            record(state)


def _log_normal_q(phi_star_k, phi_cur, gamma_k):
    d = phi_star_k - phi_cur
    return float(0.5 * phi_star_k.size * (math.log(gamma_k) - LOG_2PI) - 0.5 * gamma_k * (d @ d))


def _swap_log_lr(state, yt, lm, k, new_coeffs):
    """Allocated-point log likelihood ratio of replacing component k's AR block."""
    spec = state.spec
    mask = state.alloc.z == k
    if not mask.any():
        return 0.0
    shift = spec.shifts[k - 1]
    tau = 1.0 / spec.scales[k - 1] ** 2
    x_new = lm[mask, : new_coeffs.size]
    x_cur = lm[mask, : spec.ar_coeffs[k - 1].size]
    r = yt[mask] - shift
    e_new = r - x_new @ new_coeffs
    e_cur = r - x_cur @ spec.ar_coeffs[k - 1]
    return -0.5 * tau * float(e_new @ e_new - e_cur @ e_cur)


def _swap_stable(state, k, new_coeffs):
    ar = list(state.spec.ar_coeffs)
    ar[k - 1] = new_coeffs
    cand = MARSpec(
        weights=state.spec.weights,
        shifts=state.spec.shifts,
        ar_coeffs=tuple(ar),
        scales=state.spec.scales,
    )
    return is_stable(cand).stable


def estimate_phi_ordinate(
    series: TimeSeries,
    star: StarredPoint,
    hyper: Hyperparams,
    gamma: np.ndarray,
    config: EvidenceConfig,
    rng: np.random.Generator,
    cond: int,
) -> tuple[float, list[float]]:
    """Log posterior ordinate of the AR blocks at their starred values.

    Components are processed in index order; the ordinate of component k
    conditions on the earlier blocks by pinning them in both reduced chains.
    Chain one (earlier blocks pinned) averages alpha(phi_k -> phi*_k) times
    the proposal density; chain two (component k pinned too) averages
    alpha(phi*_k -> proposal draws).  Acceptance probabilities include the
    whole-model stability indicator.
    """
    g = star.spec.g
    yt, lm = _design(series.values, cond)
    per_k: list[float] = []
    for k in range(1, g + 1):
        phi_star_k = star.spec.ar_coeffs[k - 1]
        gamma_k = float(gamma[k - 1])

        num_terms = np.empty(config.n_j)
        j = 0

        def record_num(state):
            nonlocal j
            phi_cur = state.spec.ar_coeffs[k - 1]
            if _swap_stable(state, k, phi_star_k):
                log_alpha = min(0.0, _swap_log_lr(state, yt, lm, k, phi_star_k))
            else:
                log_alpha = -math.inf
            num_terms[j] = log_alpha + _log_normal_q(phi_star_k, phi_cur, gamma_k)
            j += 1

        mask1 = UpdateMask(ar=frozenset(range(k, g + 1)))
        _reduced_loop(
            series, hyper, star, gamma, cond, config.n_j, config.reduced_burn_in,
            rng, mask1, record_num,
        )

        den_terms = np.empty(config.n_i)
        i = 0

        def record_den(state):
            nonlocal i
            prop = phi_star_k + rng.normal(0.0, 1.0 / math.sqrt(gamma_k), phi_star_k.size)
            if _swap_stable(state, k, prop):
                den_terms[i] = min(0.0, _swap_log_lr(state, yt, lm, k, prop))
            else:
                den_terms[i] = -math.inf
            i += 1

        mask2 = UpdateMask(ar=frozenset(range(k + 1, g + 1)))
        _reduced_loop(
            series, hyper, star, gamma, cond, config.n_i, config.reduced_burn_in,
            rng, mask2, record_den,
        )

        log_num = logsumexp(num_terms) - math.log(config.n_j)
        log_den = logsumexp(den_terms) - math.log(config.n_i)
        if not np.isfinite(log_num) or not np.isfinite(log_den):
            raise ValueError(
                f"AR ordinate for component {k} degenerate (numerator {log_num}, "
                f"denominator {log_den}); increase n_j/n_i"
            )
        per_k.append(float(log_num - log_den))
    return float(sum(per_k)), per_k


def estimate_mu_ordinate(
    series: TimeSeries,
    star: StarredPoint,
    hyper: Hyperparams,
    gamma: np.ndarray,
    config: EvidenceConfig,
    rng: np.random.Generator,
    cond: int,
) -> float:
    """Rao-Blackwellized log ordinate of the means given the starred AR blocks."""
    if hyper.fixed_shift:
        return 0.0
    g = star.spec.g
    yt, lm = _design(series.values, cond)
    phi_mat = star.spec.phi_matrix(lm.shape[1])
    r_star = yt[:, None] - lm @ phi_mat.T  # shift-free residuals at phi*
    bk = 1.0 - phi_mat.sum(axis=1)
    terms = np.empty(config.n_i)
    i = 0

    def record(state):
        nonlocal i
        z0 = state.alloc.z - 1
        counts = state.alloc.counts
        tau = state.spec.precisions
        total = 0.0
        for k in range(g):
            nk = counts[k]
            ebar = r_star[z0 == k, k].mean() if nk > 0 else 0.0
            prec = tau[k] * nk * bk[k] ** 2 + hyper.kappa
            m = (tau[k] * nk * ebar * bk[k] + hyper.kappa * hyper.zeta) / prec
            total += 0.5 * (math.log(prec) - LOG_2PI) - 0.5 * prec * (star.means[k] - m) ** 2
        terms[i] = total
        i += 1

    mask = UpdateMask(ar=frozenset())
    _reduced_loop(
        series, hyper, star, gamma, cond, config.n_i, config.reduced_burn_in, rng, mask, record
    )
    return float(logsumexp(terms) - math.log(config.n_i))


def estimate_tau_ordinate(
    series: TimeSeries,
    star: StarredPoint,
    hyper: Hyperparams,
    gamma: np.ndarray,
    config: EvidenceConfig,
    rng: np.random.Generator,
    cond: int,
) -> float:
    """Rao-Blackwellized log ordinate of the precisions given starred AR and means."""
    g = star.spec.g
    yt, lm = _design(series.values, cond)
    phi_mat = star.spec.phi_matrix(lm.shape[1])
    e_star = yt[:, None] - star.spec.shifts[None, :] - lm @ phi_mat.T
    tau_star = star.spec.precisions
    c = hyper.c
    terms = np.empty(config.n_i)
    i = 0

    def record(state):
        nonlocal i
        z0 = state.alloc.z - 1
        counts = state.alloc.counts
        lam = state.lam
        total = 0.0
        for k in range(g):
            nk = counts[k]
            sse = float(np.sum(e_star[z0 == k, k] ** 2)) if nk > 0 else 0.0
            shape = c + nk / 2.0
            rate = lam + sse / 2.0
            total += (
                shape * math.log(rate)
                - math.lgamma(shape)
                + (shape - 1.0) * math.log(tau_star[k])
                - rate * tau_star[k]
            )
        terms[i] = total
        i += 1

    mask = UpdateMask(ar=frozenset(), means=False)
    _reduced_loop(
        series, hyper, star, gamma, cond, config.n_i, config.reduced_burn_in, rng, mask, record
    )
    return float(logsumexp(terms) - math.log(config.n_i))


def estimate_pi_ordinate(
    series: TimeSeries,
    star: StarredPoint,
    hyper: Hyperparams,
    gamma: np.ndarray,
    config: EvidenceConfig,
    rng: np.random.Generator,
    cond: int,
) -> float:
    """Rao-Blackwellized log ordinate of the weights given all other starred blocks."""
    g = star.spec.g
    dw = _dirichlet_prior(hyper, g)
    log_pi_star = np.log(star.spec.weights)
    terms = np.empty(config.n_i)
    i = 0

    def record(state):
        nonlocal i
        alpha = dw + state.alloc.counts
        terms[i] = (
            math.lgamma(float(alpha.sum()))
            - float(np.sum([math.lgamma(float(x)) for x in alpha]))
            + float(np.dot(alpha - 1.0, log_pi_star))
        )
        i += 1

    mask = UpdateMask(ar=frozenset(), means=False, precisions=False)
    _reduced_loop(
        series, hyper, star, gamma, cond, config.n_i, config.reduced_burn_in, rng, mask, record
    )
    return float(logsumexp(terms) - math.log(config.n_i))


def _child_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(n)]


def marginal_log_likelihood(
    series: TimeSeries,
    g: int,
    hyper: Hyperparams,
    config: EvidenceConfig,
    seed: int,
) -> EvidenceResult:
    """Full evidence pipeline for one component count.

    Runs the order-move chain, fixes the order configuration (modal or the
    one requested), refits at fixed orders, relabels, picks theta*, then
    estimates the four posterior ordinates in their required sequence and
    assembles the evidence identity.
    """
    s_rj, s_fit, s_ord = _child_seeds(seed, 3)
    trace, _ = rjmcmc_run(series, g, hyper, config.order_config, s_rj)
    orders = config.orders if config.orders is not None else trace.modal()
    orders = tuple(int(p) for p in orders)
    preference = trace.preference(orders)
    if preference <= 0.0:
        raise ValueError(
            f"order configuration {orders} was never visited; "
            "cannot estimate its posterior probability"
        )

    output = run_chain(series, g, orders, hyper, s_fit)
    output = relabel_chain(output, config.relabel)
    star = starred_point(output)
    cond = output.cond
    gamma = output.gamma
    rng = np.random.default_rng(s_ord)

    log_phi, per_k = estimate_phi_ordinate(series, star, hyper, gamma, config, rng, cond)
    log_mu = estimate_mu_ordinate(series, star, hyper, gamma, config, rng, cond)
    log_tau = estimate_tau_ordinate(series, star, hyper, gamma, config, rng, cond)
    log_pi = estimate_pi_ordinate(series, star, hyper, gamma, config, rng, cond)

    ll = log_likelihood(star.spec, series, cond)
    lp = log_prior_density(star.spec.weights, star.means, star.spec.scales, hyper)
    log_order_prior = -g * math.log(config.order_config.p_max)
    log_order_post = math.log(preference)

    parts = {
        "log_likelihood": ll,
        "log_prior": lp,
        "log_order_prior": log_order_prior,
        "log_phi_ordinate": log_phi,
        "log_mu_ordinate": log_mu,
        "log_tau_ordinate": log_tau,
        "log_pi_ordinate": log_pi,
        "log_order_posterior": log_order_post,
    }
    for k, v in enumerate(per_k, start=1):
        parts[f"log_phi_ordinate_{k}"] = v
    log_marginal = (
        ll + lp + log_order_prior - log_phi - log_mu - log_tau - log_pi - log_order_post
    )
    return EvidenceResult(
        g=g,
        orders=orders,
        preference=preference,
        log_marginal=log_marginal,
        parts=parts,
        theta_star=star.spec,
        theta_star_means=star.means,
    )


def _evidence_worker(args):
    series_values, g, hyper, config, seed = args
    series = TimeSeries(series_values)
    return marginal_log_likelihood(series, g, hyper, config, seed)


def select_g(
    series: TimeSeries,
    g_range: tuple[int, ...],
    hyper: Hyperparams,
    config: EvidenceConfig,
    seed: int,
    workers: int = 1,
) -> tuple[int, list[EvidenceResult]]:
    """Evidence for every candidate component count; best g by log marginal.

    Candidates get independent derived seeds; with workers > 1 they run in
    separate processes, assembled by candidate order so results do not
    depend on completion order.  Ties resolve to the smaller g.
    """
    g_range = tuple(int(x) for x in g_range)
    if not g_range or any(x < 1 for x in g_range):
        raise ValueError("g_range must contain positive component counts")
    seeds = _child_seeds(seed, len(g_range))
    jobs = [(series.values, g, hyper, config, s) for g, s in zip(g_range, seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evidence_worker, jobs))
    else:
        results = [_evidence_worker(job) for job in jobs]
    log_p_g = -math.log(len(g_range))
    for res in results:
        res.log_p_g = log_p_g
    best = min(results, key=lambda r: (-r.log_marginal, r.g))
    return best.g, results
