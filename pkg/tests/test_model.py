import numpy as np
import pytest

from poismer.errors import DimensionMismatch, ExponentOverflow
from poismer.model import (Dataset, corrected_score_oracle, gradient, hessian,
                           loss, sigma_hat)

from conftest import random_dataset


def make(W, Y, omega):
    return Dataset(W=np.atleast_2d(np.asarray(W, float)),
                   Y=np.asarray(Y, float),
                   omega=np.atleast_2d(np.asarray(omega, float)))


class TestDatasetValidation:
    def test_rejects_asymmetric_omega(self):
        with pytest.raises(ValueError, match="symmetric"):
            make([[1.0, 0.0]] * 2, [1, 1], [[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_indefinite_omega(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            make([[1.0, 0.0]], [1], [[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError, match="nonnegative"):
            make([[1.0]], [-1], [[0.0]])

    def test_rejects_fractional_counts(self):
        with pytest.raises(ValueError):
            make([[1.0]], [1.5], [[0.0]])

    def test_rejects_wrong_shapes(self):
        with pytest.raises(DimensionMismatch):
            make([[1.0, 2.0]], [1], [[1.0]])
        with pytest.raises(DimensionMismatch):
            make([[1.0]], [1, 2], [[1.0]])


class TestLoss:
    def test_zero_beta_gives_one(self, rng):
        for _ in range(5):
            data, _ = random_dataset(rng, 30, 4)
            assert loss(data, np.zeros(4)) == pytest.approx(1.0, abs=1e-12)

    def test_hand_value_clean(self):
        data = make([[1.0]], [2], [[0.0]])
        assert loss(data, [0.1]) == pytest.approx(np.exp(0.1) - 0.2, abs=1e-12)

    def test_hand_value_noisy(self):
        data = make([[1.0]], [0], [[1.0]])
        assert loss(data, [1.0]) == pytest.approx(np.exp(0.5), abs=1e-12)

    def test_overflow_raises(self):
        data = make([[1.0]], [1], [[0.0]])
        with pytest.raises(ExponentOverflow):
            loss(data, [800.0])

    def test_rejects_nonfinite_beta(self):
        data = make([[1.0]], [1], [[0.0]])
        with pytest.raises(ValueError):
            loss(data, [np.nan])


def fd_gradient(data, beta, h=1e-6):
    p = len(beta)
    g = np.zeros(p)
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        g[j] = (loss(data, beta + e) - loss(data, beta - e)) / (2 * h)
    return g


def fd_hessian(data, beta, h=1e-6):
    p = len(beta)
    H = np.zeros((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        H[:, j] = (gradient(data, beta + e) - gradient(data, beta - e)) / (2 * h)
    return H


class TestGradient:
    def test_zero_beta_formula(self, rng):
        data, _ = random_dataset(rng, 25, 4)
        expected = -(data.W.T @ (data.Y - 1.0)) / data.n
        np.testing.assert_allclose(gradient(data, np.zeros(4)), expected,
                                   atol=1e-12)

    def test_hand_zero_gradient(self):
        # W - omega beta = 0 kills the exp term; Y = 0 kills the linear one
        data = make([[1.0]], [0], [[1.0]])
        np.testing.assert_allclose(gradient(data, [1.0]), [0.0], atol=1e-12)

    def test_matches_finite_differences(self, rng):
        for _ in range(20):
            n = int(rng.integers(10, 51))
            p = int(rng.integers(2, 11))
            data, beta = random_dataset(rng, n, p)
            g = gradient(data, beta)
            fd = fd_gradient(data, beta)
            assert np.linalg.norm(g - fd) < 1e-6 * max(1.0, np.linalg.norm(fd))


class TestHessian:
    def test_zero_beta_formula(self, rng):
        data, _ = random_dataset(rng, 25, 4)
        expected = data.W.T @ data.W / data.n - data.omega
        np.testing.assert_allclose(hessian(data, np.zeros(4)), expected,
                                   atol=1e-12)

    def test_hand_value(self):
        data = make([[1.0]], [0], [[1.0]])
        np.testing.assert_allclose(hessian(data, [1.0]),
                                   [[-np.exp(0.5)]], atol=1e-9)

    def test_matches_finite_differences(self, rng):
        for _ in range(20):
            n = int(rng.integers(10, 51))
            p = int(rng.integers(2, 11))
            data, beta = random_dataset(rng, n, p)
            H = hessian(data, beta)
            np.testing.assert_allclose(H, fd_hessian(data, beta), atol=1e-5)

    def test_exactly_symmetric(self, rng):
        data, beta = random_dataset(rng, 40, 6)
        H = hessian(data, beta)
        assert np.array_equal(H, H.T)


class TestSigmaHat:
    def test_omega_zero_reduces_to_poisson_information(self, rng):
        data, beta = random_dataset(rng, 30, 3, omega=np.zeros((3, 3)))
        e = np.exp(data.W @ beta)
        expected = data.W.T @ (e[:, None] * data.W) / data.n
        np.testing.assert_allclose(sigma_hat(data, beta), expected, atol=1e-10)

    def test_hand_value_at_zero_beta(self, rng):
        # at beta = 0 the residual is (Y - 1) W, whose variance given the
        # unit-variance count is E[W W']; the single-sample estimate is w w'
        w = rng.standard_normal(3)
        data = make(w[None, :], [1], np.eye(3))
        np.testing.assert_allclose(sigma_hat(data, np.zeros(3)),
                                   np.outer(w, w), atol=1e-12)

    def test_symmetry(self, rng):
        data, beta = random_dataset(rng, 40, 5)
        S = sigma_hat(data, beta)
        assert np.max(np.abs(S - S.T)) <= 1e-12

    def test_matches_residual_covariance_monte_carlo(self):
        # the estimator targets the covariance of the per-observation
        # residual vectors Y W - exp(eta) (W - omega beta)
        rng = np.random.default_rng(5)
        n, p = 50_000, 3
        beta = np.array([0.4, -0.3, 0.2])
        omega = 0.1 * np.eye(p)
        X = rng.standard_normal((n, p)) * np.sqrt(0.5)
        Y = rng.poisson(np.exp(X @ beta))
        W = X + rng.standard_normal((n, p)) * np.sqrt(0.1)
        data = Dataset(W=W, Y=Y, omega=omega)

        eta = W @ beta - 0.5 * beta @ omega @ beta
        resid = Y[:, None] * W - np.exp(eta)[:, None] * (W - omega @ beta)
        emp = resid.T @ resid / n - np.outer(resid.mean(0), resid.mean(0))
        S = sigma_hat(data, beta)
        rel = np.linalg.norm(S - emp) / np.linalg.norm(emp)
        assert rel < 0.05


class TestCorrectedScoreOracle:
    def test_omega_zero_is_exact(self):
        X = np.array([0.3, -0.2])
        beta = np.array([1.0, 0.5])
        val = corrected_score_oracle(X, beta, np.zeros((2, 2)), 100, seed=0)
        assert val == pytest.approx(np.exp(beta @ X), abs=1e-12)

    def test_scalar_lognormal_identity(self):
        val = corrected_score_oracle([1.0], [1.0], [[1.0]], 10**6, seed=11)
        # exact lognormal variance: e^{2 b'X} (e^{b'Omega b} - 1)
        se = np.sqrt(np.exp(2.0) * (np.e - 1.0) / 10**6)
        assert abs(val - np.e) <= 3 * se

    def test_two_dim_cancellation(self):
        X = np.array([0.5, 0.5])
        beta = np.array([1.0, -1.0])
        omega = 0.1 * np.eye(2)
        val = corrected_score_oracle(X, beta, omega, 10**6, seed=4)
        se = np.sqrt((np.exp(beta @ omega @ beta) - 1.0) / 10**6)
        assert abs(val - 1.0) <= 3 * se

    def test_rejects_no_draws(self):
        with pytest.raises(ValueError):
            corrected_score_oracle([1.0], [1.0], [[1.0]], 0, seed=0)
