"""Stability (second-order stationarity) checks for MAR specifications.

A MAR model is stable when the spectral radius of

    A = sum_k pi_k (A_k kron A_k)

is strictly below one, where A_k is the p x p companion matrix of component
k's AR coefficients zero-padded to the maximum order p.  Individual
components may be explosive while the mixture remains stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .model import MARSpec


@dataclass(frozen=True)
class StabilityReport:
    spectral_radius: float
    stable: bool
    matrix_dim: int


def companion_matrix(spec: "MARSpec", k: int) -> np.ndarray:
    """Companion matrix A_k of component k (1-based), zero-padded to p.

    Top row holds the AR coefficients, the subdiagonal holds ones.
    """
    if not 1 <= k <= spec.g:
        raise ValueError(f"component index k={k} must lie in 1..{spec.g}")
    p = spec.max_order
    a = np.zeros((p, p))
    a[0, :] = spec.phi_matrix()[k - 1]
    if p > 1:
        a[np.arange(1, p), np.arange(0, p - 1)] = 1.0
    return a


def stability_matrix(spec: "MARSpec") -> np.ndarray:
    """Weighted Kronecker-square matrix A = sum_k pi_k (A_k kron A_k)."""
    p = spec.max_order
    out = np.zeros((p * p, p * p))
    for k in range(1, spec.g + 1):
        ak = companion_matrix(spec, k)
        out += spec.weights[k - 1] * np.kron(ak, ak)
    return out


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest eigenvalue modulus, by dense eigenvalue decomposition."""
    if matrix.shape == (1, 1):
        return abs(float(matrix[0, 0]))
    try:
        eigvals = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as err:
        raise RuntimeError(
            f"eigenvalue computation failed on a {matrix.shape[0]}x{matrix.shape[1]} "
            f"matrix (max |entry| {np.abs(matrix).max():.3e}): {err}"
        ) from err
    return float(np.abs(eigvals).max())


def is_stable(spec: "MARSpec") -> StabilityReport:
    """Stability verdict for a MAR specification.

    The verdict is strict: spectral radius exactly 1 is unstable.
    """
    mat = stability_matrix(spec)
    radius = spectral_radius(mat)
    return StabilityReport(spectral_radius=radius, stable=radius < 1.0, matrix_dim=mat.shape[0])
