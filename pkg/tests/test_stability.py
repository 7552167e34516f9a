"""Stability matrix, spectral radius, strict stability verdicts."""

import numpy as np
import pytest

from mixar.datasets import model_a_spec, model_b_spec
from mixar.model import MARSpec, simulate_path
from mixar.stability import (
    StabilityReport,
    companion_matrix,
    is_stable,
    spectral_radius,
    stability_matrix,
)


def ar1_spec(phi, weight_pairs=None):
    """Single-component AR(1) helper."""
    return MARSpec(
        weights=np.array([1.0]),
        shifts=np.zeros(1),
        ar_coeffs=(np.array([float(phi)]),),
        scales=np.ones(1),
    )


def _power_iteration_radius(mat, iters=20_000):
    """Independent oracle: spectral radius via power iteration on A'A pairs.

    Uses the fact that rho(A) = lim ||A^m v||^(1/m); run on the matrix and a
    random start, with renormalization to avoid overflow.
    """
    rng = np.random.default_rng(0)
    v = rng.normal(size=mat.shape[0])
    v /= np.linalg.norm(v)
    log_growth = 0.0
    warm = 2_000
    acc = 0.0
    for i in range(iters):
        v = mat @ v
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        v /= norm
        if i >= warm:
            acc += np.log(norm)
    return float(np.exp(acc / (iters - warm)))


class TestCompanion:
    def test_model_a_companions(self):
        spec = model_a_spec()
        np.testing.assert_allclose(companion_matrix(spec, 1), [[-0.5]])
        np.testing.assert_allclose(companion_matrix(spec, 2), [[1.0]])
        with pytest.raises(ValueError):
            companion_matrix(spec, 3)

    def test_model_b_companion_layout(self):
        spec = model_b_spec()
        a1 = companion_matrix(spec, 1)
        np.testing.assert_allclose(a1, [[-0.5, 0.5], [1.0, 0.0]])
        a2 = companion_matrix(spec, 2)
        np.testing.assert_allclose(a2, [[-0.4, 0.0], [1.0, 0.0]])


class TestStabilityMatrix:
    def test_model_a_matrix_is_scalar(self):
        mat = stability_matrix(model_a_spec())
        assert mat.shape == (1, 1)
        # 0.5*(-0.5)^2 + 0.5*1^2 = 0.625
        assert mat[0, 0] == pytest.approx(0.625, abs=1e-15)

    def test_kron_by_hand(self):
        spec = model_b_spec()
        mat = stability_matrix(spec)
        expect = np.zeros((4, 4))
        for w, a in zip(spec.weights, (companion_matrix(spec, k) for k in (1, 2, 3))):
            expect += w * np.kron(a, a)
        np.testing.assert_allclose(mat, expect)


class TestSpectralRadius:
    def test_model_a_exact(self):
        report = is_stable(model_a_spec())
        assert isinstance(report, StabilityReport)
        assert report.spectral_radius == pytest.approx(0.625, abs=1e-12)
        assert report.stable
        assert report.matrix_dim == 1

    def test_single_component_matches_root_oracle(self):
        # for g=1 the model is a linear AR(p); the Kronecker-square radius is
        # the square of the companion radius, i.e. max |root|^2 of the
        # characteristic polynomial z^p - phi_1 z^(p-1) - ... - phi_p
        rng = np.random.default_rng(42)
        checked = 0
        for _ in range(1000):
            p = int(rng.integers(1, 5))
            coeffs = rng.uniform(-0.9, 0.9, size=p)
            spec = MARSpec(
                weights=np.array([1.0]),
                shifts=np.zeros(1),
                ar_coeffs=(coeffs,),
                scales=np.ones(1),
            )
            roots = np.roots(np.concatenate(([1.0], -coeffs)))
            expected = float(np.max(np.abs(roots)) ** 2) if p else 0.0
            got = spectral_radius(stability_matrix(spec))
            assert got == pytest.approx(expected, abs=1e-8)
            checked += 1
        assert checked == 1000

    def test_power_iteration_oracle(self):
        mat = stability_matrix(model_b_spec())
        dense = spectral_radius(mat)
        power = _power_iteration_radius(mat)
        assert dense == pytest.approx(power, abs=1e-8)

    def test_shrinking_coefficients_reduce_radius(self):
        spec = model_b_spec()
        radii = []
        for s in (1.0, 0.8, 0.6, 0.4, 0.2):
            shrunk = MARSpec(
                weights=spec.weights,
                shifts=spec.shifts,
                ar_coeffs=tuple(s * a for a in spec.ar_coeffs),
                scales=spec.scales,
            )
            radii.append(spectral_radius(stability_matrix(shrunk)))
        assert all(r1 > r2 for r1, r2 in zip(radii, radii[1:]))


class TestVerdicts:
    def test_strictness_at_one(self):
        assert not is_stable(ar1_spec(1.0)).stable
        assert is_stable(ar1_spec(1.0 - 1e-9)).stable
        assert not is_stable(ar1_spec(-1.0)).stable

    def test_explosive_component_stable_mixture(self):
        # component 2 alone is a random walk (|phi|=1), yet the mixture is stable
        report = is_stable(model_a_spec())
        assert report.stable
        comp2 = ar1_spec(1.0)
        assert not is_stable(comp2).stable

    def test_tiny_weight_on_explosive_component(self):
        eps = 1e-3
        spec = MARSpec(
            weights=np.array([1.0 - eps, eps]),
            shifts=np.zeros(2),
            ar_coeffs=(np.array([0.0]), np.array([2.0])),
            scales=np.ones(2),
        )
        # radius = (1-eps)*0 + eps*4 = 0.004 < 1
        report = is_stable(spec)
        assert report.spectral_radius == pytest.approx(4 * eps, abs=1e-12)
        assert report.stable
        heavy = MARSpec(
            weights=np.array([0.5, 0.5]),
            shifts=np.zeros(2),
            ar_coeffs=(np.array([0.0]), np.array([2.0])),
            scales=np.ones(2),
        )
        assert not is_stable(heavy).stable

    def test_stable_spec_simulates_with_bounded_variance(self):
        # empirical cross-check: a spec close to the boundary still mixes
        spec = MARSpec(
            weights=np.array([0.5, 0.5]),
            shifts=np.zeros(2),
            ar_coeffs=(np.array([-0.7]), np.array([1.1])),
            scales=np.array([1.0, 1.0]),
        )
        report = is_stable(spec)
        assert report.stable
        series = simulate_path(spec, 200_000, seed=8)
        assert np.isfinite(series.values).all()
        assert series.values.std() < 50
