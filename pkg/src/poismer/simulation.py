"""Data generators and the size/power experiment battery.

Designs follow the benchmark setup: sparse truth
beta = (0.75, -0.75 + h2, h3, 0, ..., 0, hp), covariates drawn normal or
uniform with covariance 0.5 I or AR(1), noise covariance 0.1 Sigma, and
ten linear hypotheses tested at level 0.05.
"""

import os

import numpy as np
from dataclasses import dataclass

from .constraints import HypothesisSpec
from .errors import ExponentOverflow, PoismerError
from .inference import score_test, wald_test
from .model import Dataset, EXP_GUARD
from .solver import SolverConfig, default_lambda_grid

__all__ = [
    "SimDesign",
    "SizePowerRow",
    "sigma_matrix",
    "beta_true",
    "hypothesis_for",
    "varying_slot",
    "gen_covariates",
    "gen_outcome",
    "run_experiment",
    "naive_comparison",
]

HYPOTHESIS_IDS = tuple(f"H{i:02d}" for i in range(1, 11))
ALPHA = 0.05


@dataclass(frozen=True)
class SimDesign:
    n: int = 300
    p: int = 50
    x_dist: str = "normal"  # "normal" or "uniform"
    sigma_kind: str = "identity"  # "identity" (0.5 I) or "ar1"
    omega_scale: float = 0.1
    h: float = 0.0  # value of the hypothesis' varying h-slot
    hypothesis_id: str = "H02"
    reps: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.x_dist not in ("normal", "uniform"):
            raise ValueError("x_dist must be 'normal' or 'uniform'")
        if self.sigma_kind not in ("identity", "ar1"):
            raise ValueError("sigma_kind must be 'identity' or 'ar1'")
        if self.hypothesis_id not in HYPOTHESIS_IDS:
            raise ValueError(f"hypothesis_id must be one of {HYPOTHESIS_IDS}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


@dataclass(frozen=True)
class SizePowerRow:
    hypothesis: str
    h: float
    wald_rate: float
    score_rate: float
    wald_se: float
    score_se: float
    reps: int
    failures: int


def sigma_matrix(kind, p):
    if kind == "identity":
        return 0.5 * np.eye(p)
    ij = np.arange(p)
    return 0.5 ** (np.abs(ij[:, None] - ij[None, :]) + 1.0)


def varying_slot(hypothesis_id):
    """Which of (h2, h3, hp) the design's h value feeds, per hypothesis."""
    return {
        "H01": "h2", "H02": "h3", "H03": "hp",
        "H04": "h2", "H05": "h3", "H06": "hp",
        "H07": "h3", "H08": "h3", "H09": "h3", "H10": "h3",
    }[hypothesis_id]


def beta_true(p, h2=0.0, h3=0.0, hp=0.0):
    beta = np.zeros(p)
    beta[0] = 0.75
    beta[1] = -0.75 + h2
    beta[2] = h3
    beta[p - 1] = beta[p - 1] + hp
    return beta


def hypothesis_for(hypothesis_id, p):
    """HypothesisSpec (0-based M) for each of the ten benchmark tests."""
    last = p - 1
    table = {
        "H01": ([[1.0]], [-0.75], [1]),
        "H02": ([[1.0]], [0.0], [2]),
        "H03": ([[1.0]], [0.0], [last]),
        "H04": ([[1.0, 1.0]], [0.0], [0, 1]),
        "H05": ([[1.0, 1.0]], [0.0], [2, 3]),
        "H06": ([[1.0, 1.0]], [0.75], [0, last]),
        "H07": ([[1.0, 1.0]], [-0.75], [1, 2]),
        "H08": ([[1.0] * 4], [0.0], list(range(4))),
        "H09": ([[1.0] * 8], [0.0], list(range(8))),
        "H10": ([[1.0] * 12], [0.0], list(range(12))),
    }
    C, t, M = table[hypothesis_id]
    return HypothesisSpec(C=np.asarray(C), t=np.asarray(t), M=np.asarray(M))


def design_beta(design):
    kw = {varying_slot(design.hypothesis_id): design.h}
    return beta_true(design.p, **kw)


def gen_covariates(design, rng):
    """Draw the n x p matrix of true covariates X."""
    sigma = sigma_matrix(design.sigma_kind, design.p)
    L = np.linalg.cholesky(sigma)
    if design.x_dist == "normal":
        return rng.standard_normal((design.n, design.p)) @ L.T
    half = np.sqrt(6.0) / 2.0
    return rng.uniform(-half, half, size=(design.n, design.p)) @ L.T


def gen_outcome(X, beta, rng):
    """Poisson counts with rate exp(X beta)."""
    eta = X @ beta
    if np.max(eta) > EXP_GUARD:
        raise ExponentOverflow("outcome rate exponent exceeds guard")
    return rng.poisson(np.exp(eta))


def _draw_dataset(design, rng, x_sigma=None, u_sigma=None):
    if x_sigma is None:
        x_sigma = sigma_matrix(design.sigma_kind, design.p)
        X = gen_covariates(design, rng)
    else:
        X = rng.standard_normal((design.n, design.p)) @ np.linalg.cholesky(x_sigma).T
    if u_sigma is None:
        u_sigma = design.omega_scale * x_sigma
    U = rng.standard_normal((design.n, design.p)) @ np.linalg.cholesky(u_sigma).T
    beta = design_beta(design)
    Y = gen_outcome(X, beta, rng)
    return X + U, Y, u_sigma


def _n_jobs():
    try:
        return max(1, int(os.environ.get("NP_THREADS", "1")))
    except ValueError:
        return 1


def _single_rep(design, config, child_seed, tests, x_sigma=None,
                u_sigma=None, naive=False):
    """One replication; returns (wald_reject, score_reject) with None for
    a test that was not requested, or "fail" markers on solver errors."""
    rng = np.random.default_rng(child_seed)
    W, Y, omega = _draw_dataset(design, rng, x_sigma, u_sigma)
    if naive:
        omega = np.zeros_like(omega)
    spec = hypothesis_for(design.hypothesis_id, design.p)
    grid = default_lambda_grid()
    out = {}
    try:
        data = Dataset(W=W, Y=Y, omega=omega)
        if "wald" in tests:
            res = wald_test(data, spec, grid=grid, config=config)
            out["wald"] = res.p_value < ALPHA
        if "score" in tests:
            res = score_test(data, spec, grid=grid, config=config)
            out["score"] = res.p_value < ALPHA
    except PoismerError:
        return None
    return out


def _aggregate(design, results, tests):
    ok = [r for r in results if r is not None]
    failures = len(results) - len(ok)
    n_eff = len(ok)

    def rate_se(name):
        if name not in tests or n_eff == 0:
            return float("nan"), float("nan")
        rate = float(np.mean([r[name] for r in ok]))
        return rate, float(np.sqrt(rate * (1 - rate) / n_eff))

    w, wse = rate_se("wald")
    s, sse = rate_se("score")
    return SizePowerRow(
        hypothesis=design.hypothesis_id,
        h=design.h,
        wald_rate=w,
        score_rate=s,
        wald_se=wse,
        score_se=sse,
        reps=n_eff,
        failures=failures,
    )


def _run_reps(design, config, tests, x_sigma=None, u_sigma=None, naive=False):
    seeds = np.random.SeedSequence(design.seed).spawn(design.reps)
    jobs = _n_jobs()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _rep_star,
                    [(design, config, s, tests, x_sigma, u_sigma, naive)
                     for s in seeds],
                )
            )
    else:
        results = [
            _single_rep(design, config, s, tests, x_sigma, u_sigma, naive)
            for s in seeds
        ]
    return _aggregate(design, results, tests)


def _rep_star(args):
    return _single_rep(*args)


def run_experiment(design, config=SolverConfig(), tests=("wald", "score")):
    """Monte Carlo rejection rates for one design at level 0.05.

    Failed replications are excluded from the denominator and reported in
    the ``failures`` field.
    """
    return _run_reps(design, config, tests)


def naive_comparison(design, config=SolverConfig(), tests=("wald", "score")):
    """Corrected-vs-naive battery: X ~ N(0, 0.7 I), U ~ N(0, 0.3 I).

    Returns (corrected_row, naive_row); the naive pass forces Omega = 0 so
    the tests ignore the measurement error.
    """
    p = design.p
    x_sigma = 0.7 * np.eye(p)
    u_sigma = 0.3 * np.eye(p)
    corrected = _run_reps(design, config, tests, x_sigma, u_sigma, naive=False)
    naive = _run_reps(design, config, tests, x_sigma, u_sigma, naive=True)
    return corrected, naive
