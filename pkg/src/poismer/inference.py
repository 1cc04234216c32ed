"""Wald and score statistics for linear hypotheses on the coefficients.

Both statistics studentize by the same r x r sandwich built from the
restricted Hessian and residual covariance on the index set M union S,
and are referred to a chi-square with r degrees of freedom.
"""

import json

import numpy as np
from dataclasses import dataclass
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.special import gammaincc, ndtr

from . import model
from .errors import IllConditioned
from .solver import SolverConfig, default_lambda_grid, select_lambda

__all__ = [
    "TestResult",
    "psi",
    "wald_test",
    "score_test",
    "chisq_sf",
    "bh_fdr",
]


@dataclass(frozen=True)
class TestResult:
    kind: str  # "wald" or "score"
    statistic: float
    df: int
    p_value: float
    index_set: np.ndarray  # M union S, tested block first
    lam: float
    diagnostics: tuple = ()

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "statistic": self.statistic,
                "df": self.df,
                "p_value": self.p_value,
                "lambda": self.lam,
                "support": self.index_set.tolist(),
            }
        )


def chisq_sf(x, df):
    """Chi-square survival function via the regularized incomplete gamma."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(gammaincc(df / 2.0, x / 2.0))


def _restricted_solve_factor(Q, idx, diagnostics):
    """Cholesky factor of the symmetrized (idx, idx) block of Q, with a
    trace-scaled ridge retry on failure."""
    Qr = Q[np.ix_(idx, idx)]
    Qr = (Qr + Qr.T) / 2
    ev = np.linalg.eigvalsh(Qr)
    if ev[0] <= 0 or ev[-1] / ev[0] >= 1e12:
        diagnostics.append("q-ill-conditioned")
    try:
        return cho_factor(Qr, lower=True)
    except LinAlgError:
        ridge = 1e-10 * np.trace(Qr) / len(idx)
        diagnostics.append("q-ridged")
        try:
            return cho_factor(Qr + ridge * np.eye(len(idx)), lower=True)
        except LinAlgError:
            raise IllConditioned("restricted Hessian block is not invertible")


def psi(sigma, Q, spec, S):
    """Sandwich C [I 0] Qr^-1 Sigma_r Qr^-1 [I 0]' C' on M union S."""
    psi_mat, _ = _psi_impl(sigma, Q, spec, S, [])
    return psi_mat


def _psi_impl(sigma, Q, spec, S, diagnostics):
    S = np.asarray(S, dtype=int)
    idx = np.concatenate([spec.M, S])
    m, k, r = spec.m, len(S), spec.r
    fac = _restricted_solve_factor(Q, idx, diagnostics)
    # columns of [I 0]' C' live on the tested block
    JC = np.zeros((m + k, r))
    JC[:m, :] = spec.C.T
    K = cho_solve(fac, JC)  # Qr^-1 [I 0]' C'
    Sr = sigma[np.ix_(idx, idx)]
    Sr = (Sr + Sr.T) / 2
    P = K.T @ Sr @ K
    P = (P + P.T) / 2
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise IllConditioned("sandwich matrix is not positive definite")
    return P, (idx, fac, K)


def _finish(kind, stat, spec, idx, lam, p_value, diagnostics):
    return TestResult(
        kind=kind,
        statistic=float(max(stat, 0.0)),
        df=spec.r,
        p_value=p_value,
        index_set=idx,
        lam=lam,
        diagnostics=tuple(diagnostics),
    )


def _one_sided_p(stat, sign, alternative):
    z = sign * np.sqrt(max(stat, 0.0))
    if alternative == "greater":
        return float(ndtr(-z))
    return float(ndtr(z))


def wald_test(data, spec, penalty_family="scad", grid=None,
              config=SolverConfig(), alternative="two-sided", shape=None):
    """Wald statistic from the penalized fit without the null constraint.

    ``alternative`` may be "less"/"greater" only when r = 1; the signed
    square root of the statistic is then referred to a standard normal.
    """
    if grid is None:
        grid = default_lambda_grid()
    fit = select_lambda(data, penalty_family, grid, hypothesis=spec,
                        null_constrained=False, config=config, shape=shape)
    S = fit.support
    if data.n <= spec.m + len(S):
        raise IllConditioned("n must exceed m + |S| for the restricted system")
    Q = model.hessian(data, fit.beta)
    sigma = model.sigma_hat(data, fit.beta)
    diagnostics = list(fit.diagnostics)
    P, (idx, _, _) = _psi_impl(sigma, Q, spec, S, diagnostics)
    resid = spec.C @ fit.beta[spec.M] - spec.t
    stat = data.n * resid @ np.linalg.solve(P, resid)
    if alternative == "two-sided":
        p_value = chisq_sf(max(stat, 0.0), spec.r)
    else:
        if spec.r != 1:
            raise ValueError("one-sided tests require r = 1")
        p_value = _one_sided_p(stat, np.sign(resid[0]), alternative)
    return _finish("wald", stat, spec, idx, fit.lam, p_value, diagnostics)


def score_test(data, spec, penalty_family="scad", grid=None,
               config=SolverConfig(), alternative="two-sided", shape=None):
    """Score statistic from the null-constrained penalized fit."""
    if grid is None:
        grid = default_lambda_grid()
    fit = select_lambda(data, penalty_family, grid, hypothesis=spec,
                        null_constrained=True, config=config, shape=shape)
    S = fit.support
    if data.n <= spec.m + len(S):
        raise IllConditioned("n must exceed m + |S| for the restricted system")
    Q = model.hessian(data, fit.beta)
    sigma = model.sigma_hat(data, fit.beta)
    diagnostics = list(fit.diagnostics)
    P, (idx, fac, _) = _psi_impl(sigma, Q, spec, S, diagnostics)
    g = model.gradient(data, fit.beta)[idx]
    m, k, r = spec.m, len(S), spec.r
    CJ = np.zeros((r, m + k))
    CJ[:, :m] = spec.C
    u = CJ @ cho_solve(fac, g)
    stat = data.n * u @ np.linalg.solve(P, u)
    if alternative == "two-sided":
        p_value = chisq_sf(max(stat, 0.0), spec.r)
    else:
        if spec.r != 1:
            raise ValueError("one-sided tests require r = 1")
        p_value = _one_sided_p(stat, np.sign(u[0]), alternative)
    return _finish("score", stat, spec, idx, fit.lam, p_value, diagnostics)


def bh_fdr(p_values, q):
    """Benjamini-Hochberg step-up; returns the rejection mask."""
    p = np.asarray(p_values, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    N = len(p)
    order = np.argsort(p, kind="stable")
    thresholds = q * np.arange(1, N + 1) / N
    passing = np.nonzero(p[order] <= thresholds)[0]
    reject = np.zeros(N, dtype=bool)
    if passing.size:
        reject[order[: passing[-1] + 1]] = True
    return reject
