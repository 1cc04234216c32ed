import numpy as np
import pytest

from poismer.model import Dataset


def random_spd(rng, p, scale=0.1):
    A = rng.standard_normal((p, p))
    return scale * (A @ A.T / p + np.eye(p))


def random_dataset(rng, n, p, beta=None, omega=None):
    """Poisson data with normal covariates and additive normal noise."""
    if omega is None:
        omega = random_spd(rng, p, scale=0.05)
    if beta is None:
        beta = rng.uniform(-0.5, 0.5, size=p)
    X = rng.standard_normal((n, p)) * np.sqrt(0.5)
    Y = rng.poisson(np.exp(np.clip(X @ beta, None, 30)))
    L = np.linalg.cholesky(omega + 1e-12 * np.eye(p))
    W = X + rng.standard_normal((n, p)) @ L.T
    return Dataset(W=W, Y=Y, omega=omega), beta


def poisson_mle_irls(X, Y, tol=1e-12, max_iter=200):
    """Plain Poisson MLE by iteratively reweighted least squares.

    Independent of the package's Newton path; used as an oracle.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    b = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ b
        mu = np.exp(eta)
        z = eta + (Y - mu) / mu
        b_new = np.linalg.solve(X.T @ (mu[:, None] * X), X.T @ (mu * z))
        if np.max(np.abs(b_new - b)) < tol:
            return b_new
        b = b_new
    return b


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


_MC_CACHE = {}


def run_size_power(hyp, h=0.0, n=300, p=50, reps=500, sigma_kind="identity",
                   x_dist="normal", tests=("wald", "score"), naive=False):
    """Session-cached Monte Carlo runner shared by the statistical tests.

    The seed is derived deterministically from the design key so repeated
    calls (and reruns of the suite) see identical tables.
    """
    import zlib

    from poismer.simulation import SimDesign, naive_comparison, run_experiment

    key = (hyp, h, n, p, reps, sigma_kind, x_dist, tuple(tests), naive)
    if key not in _MC_CACHE:
        seed = zlib.crc32(repr(key).encode()) % 2**31
        design = SimDesign(n=n, p=p, x_dist=x_dist, sigma_kind=sigma_kind,
                           h=h, hypothesis_id=hyp, reps=reps, seed=seed)
        if naive:
            _MC_CACHE[key] = naive_comparison(design, tests=tests)
        else:
            _MC_CACHE[key] = run_experiment(design, tests=tests)
    return _MC_CACHE[key]
