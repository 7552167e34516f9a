"""Posterior summaries: moments, highest-density regions, averaged densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

try:
    from numpy import trapezoid as _trapezoid
except ImportError:  # numpy < 2
    from numpy import trapz as _trapezoid

GRID_POINTS = 512


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    standard_error: float
    hpdr_90: tuple[float, float]
    hd_value: float


@dataclass(frozen=True)
class DensityGrid:
    """A density evaluated on equally spaced abscissae."""

    x: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        d = np.asarray(self.density, dtype=float).reshape(-1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "density", d)
        if x.size != d.size:
            raise ValueError("abscissa and density lengths differ")
        if x.size < 2:
            raise ValueError("need at least two grid points")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("densities must be nonnegative")

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.x))

    def mode(self) -> float:
        return float(self.x[int(np.argmax(self.density))])


def _shortest_interval(sorted_draws: np.ndarray, mass: float) -> tuple[float, float]:
    n = sorted_draws.size
    m = int(math.ceil(mass * n))
    m = min(max(m, 1), n)
    if m == n:
        return float(sorted_draws[0]), float(sorted_draws[-1])
    widths = sorted_draws[m - 1 :] - sorted_draws[: n - m + 1]
    i = int(np.argmin(widths))
    return float(sorted_draws[i]), float(sorted_draws[i + m - 1])


def summarize(draws: np.ndarray, name: str = "") -> ParameterSummary:
    """Posterior mean, chain SD, shortest 90% interval and the density peak.

    The 90% region is the shortest empirical interval containing 90% of the
    draws; hd_value is the abscissa maximizing a Gaussian kernel density
    estimate (Silverman bandwidth).  Requires at least 100 draws.
    """
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size < 100:
        raise ValueError(f"need at least 100 draws to summarize, got {draws.size}")
    if not np.all(np.isfinite(draws)):
        raise ValueError("draws must be finite")
    mean = float(draws.mean())
    sd = float(draws.std(ddof=1))
    srt = np.sort(draws)
    hpdr = _shortest_interval(srt, 0.90)
    if srt[0] == srt[-1]:
        hd = float(srt[0])
    else:
        grid = np.linspace(srt[0], srt[-1], GRID_POINTS)
        kde = gaussian_kde(draws, bw_method="silverman")
        hd = float(grid[int(np.argmax(kde(grid)))])
    return ParameterSummary(
        name=name, mean=mean, standard_error=sd, hpdr_90=hpdr, hd_value=hd
    )


def density_grid(
    draws: np.ndarray, lower: float, upper: float, points: int = GRID_POINTS
) -> DensityGrid:
    """Gaussian KDE (Silverman bandwidth) of the draws on [lower, upper]."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if upper <= lower:
        raise ValueError(f"upper bound {upper} must exceed lower bound {lower}")
    if points < 2:
        raise ValueError("need at least two grid points")
    if draws.size < 2 or np.all(draws == draws[0]):
        raise ValueError("draws are degenerate; a kernel density estimate is undefined")
    x = np.linspace(lower, upper, points)
    kde = gaussian_kde(draws, bw_method="silverman")
    return DensityGrid(x=x, density=kde(x))


def average_density(grids: list[DensityGrid]) -> DensityGrid:
    """Pointwise mean of densities sharing one abscissa grid."""
    if not grids:
        raise ValueError("need at least one density grid")
    x0 = grids[0].x
    for gr in grids[1:]:
        if gr.x.size != x0.size or not np.array_equal(gr.x, x0):
            raise ValueError("all grids must share the same abscissae")
    dens = np.mean(np.stack([gr.density for gr in grids]), axis=0)
    return DensityGrid(x=x0.copy(), density=dens)
