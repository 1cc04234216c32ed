"""Noise-corrected Poisson loss and its derivatives.

The observed design is W = X + U with U ~ N(0, Omega).  Replacing the
error-free mean exp(b'X) by exp(b'W - b'Omega b / 2) yields a loss whose
conditional expectation given (X, Y) equals the clean negative Poisson
log-likelihood, so minimizing it corrects for the measurement error.
"""

import numpy as np
from dataclasses import dataclass

from .errors import DimensionMismatch, ExponentOverflow

EXP_GUARD = 700.0

__all__ = [
    "Dataset",
    "loss",
    "gradient",
    "hessian",
    "sigma_hat",
    "corrected_score_oracle",
]


@dataclass(frozen=True)
class Dataset:
    """Observed covariates W (n x p), counts Y (n,) and noise covariance
    Omega (p x p)."""

    W: np.ndarray
    Y: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        W = np.ascontiguousarray(np.asarray(self.W, dtype=float))
        Y = np.asarray(self.Y)
        omega = np.ascontiguousarray(np.asarray(self.omega, dtype=float))
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise DimensionMismatch("W must be a nonempty n x p matrix")
        n, p = W.shape
        if Y.shape != (n,):
            raise DimensionMismatch("Y must have length n")
        if np.any(Y < 0) or np.any(Y != np.floor(Y)):
            raise ValueError("Y entries must be nonnegative integers")
        if omega.shape != (p, p):
            raise DimensionMismatch("omega must be p x p")
        if np.max(np.abs(omega - omega.T)) > 1e-10:
            raise ValueError("omega is not symmetric within 1e-10")
        if np.min(np.linalg.eigvalsh((omega + omega.T) / 2)) < -1e-10:
            raise ValueError("omega has a negative eigenvalue below -1e-10")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Y", np.asarray(Y, dtype=float))
        object.__setattr__(self, "omega", omega)

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def p(self):
        return self.W.shape[1]


def _check_beta(data, beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,):
        raise DimensionMismatch("beta must have length p")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    return beta


def _exponents(data, beta, scale=1.0):
    """scale * b'W_i - (scale/2 adjusted) quadratic term, with overflow guard."""
    quad = beta @ data.omega @ beta
    if scale == 1.0:
        eta = data.W @ beta - 0.5 * quad
    else:
        eta = scale * (data.W @ beta) - 0.5 * scale * quad
    if eta.size and np.max(eta) > EXP_GUARD:
        raise ExponentOverflow(
            f"mean-function exponent {np.max(eta):.3g} exceeds {EXP_GUARD}"
        )
    return eta


def loss(data, beta):
    """Corrected negative log-likelihood, averaged over observations."""
    beta = _check_beta(data, beta)
    eta = _exponents(data, beta)
    lin = data.W @ beta
    return float(-np.mean(data.Y * lin - np.exp(eta)))


def gradient(data, beta):
    """Analytic gradient of :func:`loss` with respect to beta."""
    beta = _check_beta(data, beta)
    eta = _exponents(data, beta)
    e = np.exp(eta)
    R = data.W - (data.omega @ beta)[None, :]
    return -(data.W.T @ data.Y - R.T @ e) / data.n


def hessian(data, beta):
    """Second derivative of :func:`loss`; may be indefinite pointwise."""
    beta = _check_beta(data, beta)
    eta = _exponents(data, beta)
    e = np.exp(eta)
    R = data.W - (data.omega @ beta)[None, :]
    H = (R.T @ (e[:, None] * R)) / data.n - np.mean(e) * data.omega
    return (H + H.T) / 2


def sigma_hat(data, beta):
    """Closed-form estimator of the residual covariance Sigma(beta).

    Targets the covariance of the per-observation corrected-score
    residuals Y_i W_i - exp(eta_i) (W_i - Omega beta). The count and the
    unobserved clean covariate are integrated out with the exact normal
    moment identities E[e^{a'U}] = e^{a'Omega a / 2},
    E[e^{a'U} U] = e^{a'Omega a / 2} Omega a and
    E[e^{a'U} U U'] = e^{a'Omega a / 2} (Omega + Omega a a' Omega),
    leaving only observable quantities. With q = b'Omega b, v = Omega b,
    R = W - v and Rt = W - 2v:

        Sigma-hat = mean_i [ e^{b'W_i - q/2} R_i R_i'
                             + (e^q - 1) e^{2 b'W_i - 2q}
                               (Rt_i Rt_i' + Rt_i v' + v Rt_i')
                             + e^q e^{2 b'W_i - 2q} v v' ].

    Each bracketed term is conditionally unbiased for its population
    counterpart, so the estimator is consistent for any Omega; at
    Omega = 0 it reduces algebraically to the Poisson information
    mean_i e^{b'W_i} W_i W_i'. The expression is symmetric only in
    expectation, so the output is symmetrized after assembly.
    """
    beta = _check_beta(data, beta)
    quad = beta @ data.omega @ beta
    eta1 = data.W @ beta - 0.5 * quad
    eta2 = 2.0 * (data.W @ beta) - 2.0 * quad
    top = max(np.max(eta1, initial=-np.inf), np.max(eta2, initial=-np.inf))
    if data.n and top > EXP_GUARD:
        raise ExponentOverflow(
            f"residual-covariance exponent {top:.3g} exceeds {EXP_GUARD}"
        )
    e1 = np.exp(eta1)
    e2 = np.exp(eta2)
    v = data.omega @ beta
    R = data.W - v[None, :]
    Rt = data.W - 2.0 * v[None, :]
    n = data.n
    A = (R.T @ (e1[:, None] * R)) / n
    B = (Rt.T @ (e2[:, None] * Rt)) / n
    c = (Rt.T @ e2) / n
    eq = np.exp(quad)
    S = (A
         + (eq - 1.0) * (B + np.outer(c, v) + np.outer(v, c))
         + eq * np.mean(e2) * np.outer(v, v))
    return (S + S.T) / 2


def corrected_score_oracle(X, beta, omega, draws, seed):
    """Monte Carlo mean of exp(b'(X+U) - b'Omega b / 2), U ~ N(0, Omega).

    Converges to exp(b'X); used in tests to verify the correction is
    conditionally unbiased.
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = np.random.default_rng(seed)
    # eigh-based factor tolerates PSD (including exactly singular) omega
    vals, vecs = np.linalg.eigh((omega + omega.T) / 2)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    noise = rng.standard_normal((int(draws), len(beta))) @ root.T
    expo = (X + noise) @ beta - 0.5 * beta @ omega @ beta
    if np.max(expo) > EXP_GUARD:
        raise ExponentOverflow("oracle exponent exceeds guard")
    return float(np.mean(np.exp(expo)))
