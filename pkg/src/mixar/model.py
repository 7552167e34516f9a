"""Gaussian mixture autoregressive (MAR) models.

A MAR model with g components and orders (p_1, ..., p_g) describes y_t through
its conditional distribution given the past,

    F(y_t | past) = sum_k pi_k * Phi((y_t - phi_k0 - sum_i phi_ki y_{t-i}) / sigma_k),

a g-component mixture of Gaussian AR regressions.  This module holds the model
specification type and the deterministic quantities derived from it:
component residuals, one-step conditional densities and moments, likelihoods,
the theoretical autocorrelation function and path simulation.

Conventions used throughout the package:

* component indices k are 1-based (1 <= k <= g),
* time indices t are 1-based (1 <= t <= n),
* AR coefficient vectors are zero-padded to the maximum order where a
  rectangular layout is convenient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MARSpec:
    """Full parameterization of a mixture autoregressive model.

    Attributes:
        weights: mixing weights pi_k, positive, summing to one.
        shifts: per-component shifts phi_k0.
        ar_coeffs: tuple of per-component AR coefficient vectors; the length
            of the k-th vector is that component's order p_k.
        scales: per-component standard deviations sigma_k, all positive.
    """

    weights: np.ndarray
    shifts: np.ndarray
    ar_coeffs: tuple[np.ndarray, ...]
    scales: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        sh = np.asarray(self.shifts, dtype=float)
        sc = np.asarray(self.scales, dtype=float)
        ar = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.ar_coeffs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "shifts", sh)
        object.__setattr__(self, "ar_coeffs", ar)
        object.__setattr__(self, "scales", sc)
        g = w.size
        if g < 1:
            raise ValueError("need at least one component")
        if sh.size != g or sc.size != g or len(ar) != g:
            raise ValueError("weights, shifts, ar_coeffs and scales must all have length g")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("every mixing weight must be positive and finite")
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValueError(f"mixing weights must sum to 1, got {w.sum()!r}")
        if not np.all(np.isfinite(sc)) or np.any(sc <= 0.0):
            raise ValueError("every scale must be positive and finite")
        if not np.all(np.isfinite(sh)):
            raise ValueError("shifts must be finite")
        for k, a in enumerate(ar, start=1):
            if a.size < 1:
                raise ValueError(f"component {k} must have order >= 1")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"AR coefficients of component {k} must be finite")

    @property
    def g(self) -> int:
        return self.weights.size

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.ar_coeffs)

    @property
    def max_order(self) -> int:
        return max(self.orders)

    @property
    def precisions(self) -> np.ndarray:
        """Component precisions tau_k = 1 / sigma_k^2."""
        return 1.0 / self.scales**2

    def phi_matrix(self, width: int | None = None) -> np.ndarray:
        """AR coefficients as a (g, width) matrix, zero-padded on the right."""
        width = self.max_order if width is None else int(width)
        if width < self.max_order:
            raise ValueError("width smaller than the maximum order")
        out = np.zeros((self.g, width))
        for k, a in enumerate(self.ar_coeffs):
            out[k, : a.size] = a
        return out


@dataclass(frozen=True)
class TimeSeries:
    """An observed univariate series y_1, ..., y_n."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", v)
        if v.size < 1:
            raise ValueError("series must contain at least one observation")
        if not np.all(np.isfinite(v)):
            raise ValueError("series values must be finite")

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LatentAllocation:
    """Component labels for observations t = t0, ..., n.

    z holds 1-based component labels; counts holds the per-component label
    counts n_1, ..., n_g (summing to len(z)).
    """

    z: np.ndarray
    g: int
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "z", z)
        if self.g < 1:
            raise ValueError("g must be >= 1")
        if z.size and (z.min() < 1 or z.max() > self.g):
            raise ValueError("labels must lie in 1..g")
        counts = np.bincount(z, minlength=self.g + 1)[1:].astype(np.int64)
        object.__setattr__(self, "counts", counts)


def _check_time(series: TimeSeries, t: int, p: int) -> None:
    if not p < t <= series.n:
        raise ValueError(f"time index t={t} must satisfy {p} < t <= {series.n}")


def _lag_vector(values: np.ndarray, t: int, p: int) -> np.ndarray:
    """(y_{t-1}, ..., y_{t-p}) for 1-based t."""
    return values[t - 1 - p : t - 1][::-1]


def lag_matrix(values: np.ndarray, p: int, t0: int) -> np.ndarray:
    """Matrix of lagged values, row t - t0, column i-1 holding y_{t-i}.

    Rows cover t = t0, ..., n (1-based); requires t0 > p.
    """
    n = values.size
    if not p < t0 <= n:
        raise ValueError(f"t0={t0} must satisfy {p} < t0 <= {n}")
    cols = [values[t0 - 1 - i : n - i] for i in range(1, p + 1)]
    return np.column_stack(cols) if cols else np.empty((n - t0 + 1, 0))


def component_means_at(spec: MARSpec, values: np.ndarray, t: int) -> np.ndarray:
    """Conditional component means nu_tk = phi_k0 + sum_i phi_ki y_{t-i}."""
    p = spec.max_order
    lags = _lag_vector(values, t, p)
    return spec.shifts + spec.phi_matrix() @ lags


def component_residual(spec: MARSpec, series: TimeSeries, k: int, t: int) -> float:
    """Residual e_tk = y_t - nu_tk of component k (1-based) at time t (1-based)."""
    if not 1 <= k <= spec.g:
        raise ValueError(f"component index k={k} must lie in 1..{spec.g}")
    _check_time(series, t, spec.max_order)
    nu = component_means_at(spec, series.values, t)
    return float(series.values[t - 1] - nu[k - 1])


def conditional_pdf(spec: MARSpec, series: TimeSeries, t: int) -> float:
    """One-step-ahead predictive density of y_t given its past."""
    _check_time(series, t, spec.max_order)
    nu = component_means_at(spec, series.values, t)
    e = (series.values[t - 1] - nu) / spec.scales
    log_terms = np.log(spec.weights) - np.log(spec.scales) - 0.5 * e**2 - 0.5 * LOG_2PI
    return float(np.exp(logsumexp(log_terms)))


def conditional_cdf(spec: MARSpec, series: TimeSeries, t: int) -> float:
    """One-step-ahead predictive CDF of y_t given its past."""
    _check_time(series, t, spec.max_order)
    nu = component_means_at(spec, series.values, t)
    e = (series.values[t - 1] - nu) / spec.scales
    return float(np.dot(spec.weights, ndtr(e)))


def conditional_moments(spec: MARSpec, series: TimeSeries, t: int) -> tuple[float, float]:
    """Conditional mean and variance of y_t given its past.

    mean = sum_k pi_k nu_tk,
    var  = sum_k pi_k sigma_k^2 + sum_k pi_k nu_tk^2 - (sum_k pi_k nu_tk)^2.
    """
    _check_time(series, t, spec.max_order)
    nu = component_means_at(spec, series.values, t)
    mean = float(np.dot(spec.weights, nu))
    var = float(
        np.dot(spec.weights, spec.scales**2)
        + np.dot(spec.weights, nu**2)
        - mean**2
    )
    return mean, var


def component_mean(spec: MARSpec, k: int) -> float | None:
    """Stationary-style component mean mu_k = phi_k0 / (1 - sum_i phi_ki).

    Returns None when sum_i phi_ki == 1 (the transform is undefined there).
    """
    if not 1 <= k <= spec.g:
        raise ValueError(f"component index k={k} must lie in 1..{spec.g}")
    denom = 1.0 - float(spec.ar_coeffs[k - 1].sum())
    if denom == 0.0:
        return None
    return float(spec.shifts[k - 1]) / denom


def shift_from_mean(mu: float, ar: np.ndarray) -> float:
    """Inverse transform phi_k0 = mu_k (1 - sum_i phi_ki)."""
    return float(mu) * (1.0 - float(np.sum(ar)))


def _conditional_logpdf_rows(spec: MARSpec, values: np.ndarray, t0: int) -> np.ndarray:
    """Per-component log contributions log(pi_k/sigma_k phi(e_tk/sigma_k)).

    Returns a (n - t0 + 1, g) matrix of log pi_k - log sigma_k + log phi,
    rows covering t = t0..n.
    """
    p = spec.max_order
    lm = lag_matrix(values, p, t0)
    yt = values[t0 - 1 :]
    e = (yt[:, None] - spec.shifts[None, :] - lm @ spec.phi_matrix().T) / spec.scales[None, :]
    return (
        np.log(spec.weights)[None, :]
        - np.log(spec.scales)[None, :]
        - 0.5 * e**2
        - 0.5 * LOG_2PI
    )


def log_likelihood(spec: MARSpec, series: TimeSeries, cond: int | None = None) -> float:
    """Conditional log likelihood sum_{t>cond} log f(y_t | past).

    The first `cond` observations (default: the maximum order) are
    conditioned on and contribute no terms.
    """
    p = spec.max_order if cond is None else int(cond)
    if p < spec.max_order:
        raise ValueError("cannot condition on fewer observations than the maximum order")
    if series.n <= p:
        raise ValueError(f"series of length {series.n} too short for conditioning on {p} values")
    rows = _conditional_logpdf_rows(spec, series.values, p + 1)
    out = float(np.sum(logsumexp(rows, axis=1)))
    if not np.isfinite(out):
        raise ValueError("log likelihood is not finite; model collapsed numerically")
    return out


def complete_data_log_likelihood(
    spec: MARSpec,
    series: TimeSeries,
    alloc: LatentAllocation,
    cond: int | None = None,
) -> float:
    """Log likelihood of (y, z) with the allocation z treated as observed.

    sum_t [ log pi_{z_t} - log sigma_{z_t} - e_{t,z_t}^2 / (2 sigma^2) - log(2 pi)/2 ].
    """
    p = spec.max_order if cond is None else int(cond)
    if p < spec.max_order:
        raise ValueError("cannot condition on fewer observations than the maximum order")
    rows = _conditional_logpdf_rows(spec, series.values, p + 1)
    if alloc.z.size != rows.shape[0]:
        raise ValueError(
            f"allocation covers {alloc.z.size} observations, expected {rows.shape[0]}"
        )
    if alloc.g != spec.g:
        raise ValueError("allocation and spec disagree on the number of components")
    out = float(rows[np.arange(rows.shape[0]), alloc.z - 1].sum())
    if not np.isfinite(out):
        raise ValueError("complete-data log likelihood is not finite")
    return out


def theoretical_acf(spec: MARSpec, max_lag: int) -> np.ndarray:
    """Autocorrelations rho_0..rho_max_lag of a stable MAR model.

    Solves rho_h = sum_i c_i rho_{|h-i|} with aggregate coefficients
    c_i = sum_k pi_k phi_ki for h = 1..p as a linear system, then extends by
    recursion.  Raises on a singular system.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    p = spec.max_order
    c = spec.weights @ spec.phi_matrix()
    rho = np.zeros(max_lag + 1)
    rho[0] = 1.0
    m = min(p, max_lag)
    if m >= 1:
        mat = np.eye(p)
        vec = np.zeros(p)
        for h in range(1, p + 1):
            for i in range(1, p + 1):
                lag = abs(h - i)
                if lag == 0:
                    vec[h - 1] += c[i - 1]
                else:
                    mat[h - 1, lag - 1] -= c[i - 1]
        try:
            sol = np.linalg.solve(mat, vec)
        except np.linalg.LinAlgError as err:
            raise ValueError(f"autocorrelation system is singular: {err}") from err
        rho[1 : m + 1] = sol[:m]
    for h in range(p + 1, max_lag + 1):
        rho[h] = sum(c[i - 1] * rho[h - i] for i in range(1, p + 1))
    return rho


def simulate_path(
    spec: MARSpec,
    n: int,
    seed: int | np.random.Generator,
    burn: int = 500,
) -> TimeSeries:
    """Simulate n observations from a stable MAR model.

    The recursion starts from zeros and discards `burn` warm-up steps.
    Refuses to simulate from an unstable specification.
    """
    from .stability import is_stable

    if n < 1:
        raise ValueError("n must be >= 1")
    if burn < 0:
        raise ValueError("burn must be >= 0")
    report = is_stable(spec)
    if not report.stable:
        raise ValueError(
            f"refusing to simulate: spectral radius {report.spectral_radius:.6f} >= 1"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = spec.max_order
    total = n + burn
    labels = rng.choice(spec.g, size=total, p=spec.weights)
    eps = rng.standard_normal(total)
    shifts = spec.shifts.tolist()
    scales = spec.scales.tolist()
    phis = [a.tolist() for a in spec.ar_coeffs]
    hist = [0.0] * p
    out = np.empty(total)
    for t in range(total):
        k = labels[t]
        phi = phis[k]
        acc = shifts[k]
        for i, coef in enumerate(phi):
            acc += coef * hist[i]
        y = acc + scales[k] * eps[t]
        out[t] = y
        if p:
            hist.insert(0, y)
            hist.pop()
    return TimeSeries(out[burn:])
