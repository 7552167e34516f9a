"""Online k-means relabelling of mixture MCMC output.

MCMC output from an exchangeable mixture posterior is invariant under
component permutations, so raw chains can switch labels mid-run.  This
module restores a consistent labelling without imposing identifiability
constraints: cluster centres (mean and variance per coordinate) are warm
started on the first m draws, each subsequent draw is permuted to minimize
the variance-normalized squared distance to the centres, and the centres
are then updated online with the relabelled draw.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .sampler import ChainOutput

_VALID_SUBSET = ("weights", "scales", "shifts")


@dataclass(frozen=True)
class RelabelConfig:
    """Warm-start length m and the parameter blocks forming the feature vector.

    The feature vector theta concatenates one g-long block per selected name
    (any of "weights", "scales", "shifts"); the default uses mixing weights
    plus scales, which separate components more reliably than AR coefficients.
    """

    m: int = 200
    subset: tuple[str, ...] = ("weights", "scales")

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("warm-start length m must be at least 2")
        if not self.subset:
            raise ValueError("subset must name at least one parameter block")
        for name in self.subset:
            if name not in _VALID_SUBSET:
                raise ValueError(f"unknown subset entry {name!r}; choose from {_VALID_SUBSET}")
        if len(set(self.subset)) != len(self.subset):
            raise ValueError("subset entries must be unique")


@dataclass(frozen=True)
class ClusterCentres:
    """Running per-coordinate centres, biased variances and the draw count."""

    centre: np.ndarray
    variance: np.ndarray
    count: int

    def __post_init__(self):
        object.__setattr__(self, "centre", np.asarray(self.centre, dtype=float).reshape(-1))
        object.__setattr__(self, "variance", np.asarray(self.variance, dtype=float).reshape(-1))
        if self.centre.size != self.variance.size:
            raise ValueError("centre and variance must have equal length")
        if self.count < 1:
            raise ValueError("count must be positive")
        if np.any(self.variance < 0):
            raise ValueError("variances must be nonnegative")


def feature_matrix(output: ChainOutput, subset: tuple[str, ...]) -> np.ndarray:
    """(n_draws, q) matrix of the selected blocks, block order as given."""
    blocks = {"weights": output.weights, "scales": output.scales, "shifts": output.shifts}
    return np.concatenate([blocks[name] for name in subset], axis=1)


def init_centres(theta: np.ndarray) -> ClusterCentres:
    """Warm-start centres from the first m draws (rows of theta).

    Variances are the biased (1/m) second moments about the warm mean.
    Raises when any coordinate has zero variance, which would make the
    normalized distance degenerate.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] < 2:
        raise ValueError("need a (m, q) matrix with m >= 2")
    centre = theta.mean(axis=0)
    variance = np.mean((theta - centre) ** 2, axis=0)
    if np.any(variance == 0.0):
        bad = int(np.nonzero(variance == 0.0)[0][0])
        raise ValueError(
            f"coordinate {bad} has zero warm-start variance; "
            "increase m or choose a different parameter subset"
        )
    return ClusterCentres(centre=centre, variance=variance, count=theta.shape[0])


def _permute_row(theta_row: np.ndarray, g: int, perm: tuple[int, ...]) -> np.ndarray:
    return theta_row.reshape(-1, g)[:, perm].reshape(-1)


def assign_permutation(
    theta_row: np.ndarray, centres: ClusterCentres, g: int
) -> tuple[int, ...]:
    """Permutation of components minimizing the normalized squared distance.

    Exhaustive over all g! permutations; ties resolve to the
    lexicographically smallest permutation.  The returned perm relabels the
    draw as new_block[j] = old_block[perm[j]].
    """
    theta_row = np.asarray(theta_row, dtype=float).reshape(-1)
    if theta_row.size != centres.centre.size or theta_row.size % g != 0:
        raise ValueError("draw length must equal the centre length and be a multiple of g")
    best = None
    best_d = np.inf
    for perm in itertools.permutations(range(g)):
        cand = _permute_row(theta_row, g, perm)
        d = float(np.sum((cand - centres.centre) ** 2 / centres.variance))
        if d < best_d:
            best_d = d
            best = perm
    return best


def update_centres(centres: ClusterCentres, theta_row: np.ndarray) -> ClusterCentres:
    """Fold one relabelled draw into the running centres.

    With n draws seen so far, the mean update is (n*mean + theta)/(n+1) and
    the biased variance update is
    n/(n+1)*s2 + n/(n+1)*(mean_old - mean_new)^2 + (theta - mean_new)^2/(n+1).
    """
    theta_row = np.asarray(theta_row, dtype=float).reshape(-1)
    n = centres.count
    mean_new = (n * centres.centre + theta_row) / (n + 1)
    var_new = (
        n / (n + 1) * centres.variance
        + n / (n + 1) * (centres.centre - mean_new) ** 2
        + (theta_row - mean_new) ** 2 / (n + 1)
    )
    return ClusterCentres(centre=mean_new, variance=var_new, count=n + 1)


def _apply_perm_to_output(output: ChainOutput, i: int, perm: tuple[int, ...]) -> None:
    idx = np.asarray(perm)
    output.weights[i] = output.weights[i, idx]
    output.shifts[i] = output.shifts[i, idx]
    output.means[i] = output.means[i, idx]
    output.scales[i] = output.scales[i, idx]
    output.ar[i] = output.ar[i, idx, :]
    output.orders[i] = output.orders[i, idx]
    if output.allocations is not None:
        inv = np.empty(output.g, dtype=np.int64)
        inv[idx] = np.arange(output.g)
        output.allocations[i] = inv[output.allocations[i] - 1] + 1


def relabel_chain(output: ChainOutput, config: RelabelConfig | None = None) -> ChainOutput:
    """Relabel a whole chain; returns a new ChainOutput, input untouched.

    The first m draws define the warm start and keep their labels.  When the
    warm-start variance of some coordinate exceeds a quarter of its
    full-chain variance, a warning suggests the warm window may already
    contain label switches.
    """
    config = config or RelabelConfig()
    if output.g == 1:
        return replace(output)
    if config.m >= output.n_draws:
        raise ValueError(
            f"warm-start length m={config.m} must be below the number of draws "
            f"({output.n_draws})"
        )
    out = replace(
        output,
        weights=output.weights.copy(),
        shifts=output.shifts.copy(),
        means=output.means.copy(),
        scales=output.scales.copy(),
        ar=output.ar.copy(),
        orders=output.orders.copy(),
        allocations=None if output.allocations is None else output.allocations.copy(),
    )
    theta_all = feature_matrix(out, config.subset)
    centres = init_centres(theta_all[: config.m])

    full_var = theta_all.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(full_var > 0, centres.variance / full_var, 0.0)
    if np.any(ratio > 0.25):
        warnings.warn(
            "warm-start variance exceeds 25% of the full-chain variance for some "
            "coordinate; the warm window may already contain label switches",
            RuntimeWarning,
        )

    g = out.g
    for i in range(config.m, out.n_draws):
        perm = assign_permutation(theta_all[i], centres, g)
        if perm != tuple(range(g)):
            _apply_perm_to_output(out, i, perm)
        relabelled = _permute_row(theta_all[i], g, perm)
        centres = update_centres(centres, relabelled)
    return out
