"""Constrained ADMM solver for the corrected Poisson objective.

The loop alternates a Newton solve of the smooth augmented-Lagrangian
subproblem, projection onto the L1/L2 balls, an elementwise penalty prox
on the unpenalized-complement block, and dual ascent.  Lambda is tuned by
BIC over a warm-started grid.
"""

import warnings

import numpy as np
from dataclasses import dataclass, field, replace
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import model
from .constraints import FeasibleSet, constraint_residual, project_l1, shrink_l2
from .errors import AllFitsFailed, PoismerError, SingularHessian
from .penalty import PenaltySpec, prox_vector, rho

__all__ = [
    "SolverConfig",
    "FitResult",
    "newton_subproblem",
    "admm_fit",
    "default_radii",
    "bic",
    "select_lambda",
    "default_lambda_grid",
    "SUPPORT_THRESHOLD",
]

# ADMM's prox block returns exact zeros, the Newton block does not; entries
# below this threshold are treated as zero for support and BIC purposes.
SUPPORT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    rho_admm: float = 1.0
    t_max: int = 1000
    tol: float = 1e-4
    newton_max: int = 50
    newton_tol: float = 1e-8
    ridge: float = 1e-8
    r1: float = None
    r2: float = None

    def __post_init__(self):
        if self.tol <= 0 or self.rho_admm <= 0:
            raise ValueError("tol and rho_admm must be positive")

    def validate_penalty(self, spec):
        if self.rho_admm <= spec.mu:
            raise ValueError(
                f"rho_admm={self.rho_admm} must exceed the penalty's "
                f"weak-convexity constant {spec.mu:.6g}"
            )


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    support: np.ndarray  # nonzero indices of beta on the complement of M
    lam: float
    converged: bool
    iterations: int
    constraint_residual: float
    objective: float
    primal_residual: float = 0.0
    diagnostics: tuple = ()


def default_radii(beta_init):
    """Paper rule R2 = 1.5 ||beta_init||_2, R1 = sqrt(2) R2.

    A zero initializer would give degenerate radii, so R2 is floored at 10.
    """
    nrm = float(np.linalg.norm(np.asarray(beta_init, dtype=float)))
    R2 = 1.5 * nrm if nrm > 0 else 10.0
    return FeasibleSet(R1=np.sqrt(2.0) * R2, R2=R2)


class _Residual:
    """Linear residual map g(beta) = A beta - b stacking the equality
    constraint rows (when active) over beta_Mc - theta."""

    def __init__(self, p, hypothesis, constrained):
        self.p = p
        self.hyp = hypothesis
        self.constrained = bool(constrained and hypothesis is not None)
        if hypothesis is not None:
            self.M = hypothesis.M
            self.Mc = hypothesis.complement(p)
        else:
            self.M = np.empty(0, dtype=int)
            self.Mc = np.arange(p)
        self.r = hypothesis.r if self.constrained else 0
        self.dim = self.r + len(self.Mc)
        if self.constrained:
            self.CtC = hypothesis.C.T @ hypothesis.C

    def value(self, beta, theta):
        out = np.empty(self.dim)
        if self.constrained:
            out[: self.r] = self.hyp.C @ beta[self.M] - self.hyp.t
        out[self.r :] = beta[self.Mc] - theta
        return out

    def adjoint(self, u):
        """A' u scattered back into beta coordinates."""
        out = np.zeros(self.p)
        if self.constrained:
            out[self.M] = self.hyp.C.T @ u[: self.r]
        out[self.Mc] += u[self.r :]
        return out

    def add_gram(self, H, weight):
        """H += weight * A'A in place."""
        if self.constrained:
            H[np.ix_(self.M, self.M)] += weight * self.CtC
        H[self.Mc, self.Mc] += weight
        return H


def newton_subproblem(data, hypothesis, theta, v, config, beta_start,
                      constrained=True, norm_cap=np.inf):
    """Damped Newton minimization of the smooth ADMM subproblem.

    ``theta``/``v`` are the current penalty-block iterate and dual
    variables; with ``hypothesis=None`` the residual reduces to the full
    beta - theta block.  ``norm_cap`` bounds the L2 norm of any accepted
    iterate: with omega > 0 the smooth objective is unbounded below in
    the unpenalized coordinates (the exponential term vanishes once the
    quadratic dominates, leaving a linear decrease), and only the norm
    ball of the outer program rules that region out, so the inner solve
    must not wander into it.
    """
    res = _Residual(data.p, hypothesis, constrained)
    return _newton(data, res, theta, v, config, np.asarray(beta_start, float),
                   norm_cap)


def _newton(data, res, theta, v, config, beta, norm_cap=np.inf):
    rho_admm = config.rho_admm
    W, Y, omega, n = data.W, data.Y, data.omega, data.n
    WtY = W.T @ Y

    def value(b):
        nb = np.linalg.norm(b)
        if not np.isfinite(nb) or nb > norm_cap:
            return np.inf, None, None
        quad = b @ omega @ b
        wb = W @ b
        eta = wb - 0.5 * quad
        if np.max(eta) > model.EXP_GUARD:
            return np.inf, None, None
        e = np.exp(eta)
        g = res.value(b, theta)
        val = -np.mean(Y * wb - e) + v @ g + 0.5 * rho_admm * g @ g
        if not np.isfinite(val):
            return np.inf, None, None
        return val, e, g

    beta = beta.copy()
    val, e, g = value(beta)
    if not np.isfinite(val):
        raise model.ExponentOverflow("Newton start outside the sane region")
    for _ in range(config.newton_max):
        R = W - (omega @ beta)[None, :]
        grad = -(WtY - R.T @ e) / n + res.adjoint(v + rho_admm * g)
        if np.linalg.norm(grad) <= config.newton_tol:
            break
        H = (R.T @ (e[:, None] * R)) / n - np.mean(e) * omega
        res.add_gram(H, rho_admm)
        step = _solve_spd(H, grad, config.ridge)
        # backtrack: halve the step while the objective fails to decrease
        s = 1.0
        for _ in range(21):
            cand = beta - s * step
            cand_val, cand_e, cand_g = value(cand)
            if cand_val <= val:
                break
            s *= 0.5
        else:
            break  # no descent direction left; return current iterate
        if cand_val > val:
            break
        beta, val, e, g = cand, cand_val, cand_e, cand_g
    return beta


def _solve_spd(H, grad, ridge):
    """Cholesky solve with ridge escalation (x10 up to 1e-2)."""
    p = H.shape[0]
    try:
        return cho_solve(cho_factor(H, lower=True, check_finite=False), grad,
                         check_finite=False)
    except LinAlgError:
        pass
    r = max(ridge, 1e-12)
    while r <= 1e-2:
        try:
            return cho_solve(
                cho_factor(H + r * np.eye(p), lower=True, check_finite=False),
                grad, check_finite=False,
            )
        except LinAlgError:
            r *= 10.0
    raise SingularHessian("Newton system unsolvable after ridge escalation")


def admm_fit(data, penalty, hypothesis=None, null_constrained=False,
             config=SolverConfig(), beta_init=None):
    """Run the full ADMM loop for one lambda.

    The penalty acts only on coordinates outside M; with
    ``null_constrained`` the equality constraint C beta_M = t is enforced
    through the augmented Lagrangian and sharpened to machine accuracy by
    a final minimal-norm correction.
    """
    config.validate_penalty(penalty)
    p = data.p
    if beta_init is None:
        beta_init = np.zeros(p)
    beta_init = np.asarray(beta_init, dtype=float)
    radii = FeasibleSet(config.r1, config.r2) \
        if config.r1 is not None and config.r2 is not None \
        else default_radii(beta_init)

    res = _Residual(p, hypothesis, null_constrained)
    rho_admm = config.rho_admm
    beta = beta_init.copy()
    theta = beta[res.Mc].copy()
    v = np.zeros(res.dim)

    converged = False
    iterations = config.t_max
    primal = res.value(beta, theta)
    for it in range(1, config.t_max + 1):
        beta_new = _newton(data, res, theta, v, config, beta,
                           norm_cap=10.0 * radii.R2)
        if not np.all(np.isfinite(beta_new)):
            raise model.ExponentOverflow(
                "ADMM beta block left the numerically sane region"
            )
        beta_new = shrink_l2(project_l1(beta_new, radii.R1), radii.R2)
        theta_new = prox_vector(
            penalty, beta_new[res.Mc] + v[res.r :] / rho_admm, rho_admm
        )
        primal = res.value(beta_new, theta_new)
        v = v + rho_admm * primal
        # iterate-change disjunction, gated on block agreement so a frozen
        # theta block cannot trigger a bogus first-iteration stop
        stop = (
            np.linalg.norm(beta_new - beta) <= config.tol
            or np.linalg.norm(theta_new - theta) <= config.tol
        ) and np.linalg.norm(primal) <= 10 * config.tol
        beta, theta = beta_new, theta_new
        if stop:
            converged = True
            iterations = it
            break

    diagnostics = []
    if not converged:
        diagnostics.append("max-iterations")
    if np.abs(beta).sum() >= radii.R1 * (1 - 1e-6):
        diagnostics.append("l1-boundary")
        warnings.warn("solution at the L1-ball boundary; consider larger R1")
    if np.linalg.norm(beta) >= radii.R2 * (1 - 1e-6):
        diagnostics.append("l2-boundary")
        warnings.warn("solution at the L2-ball boundary; consider larger R2")

    # final estimate takes the penalized block from the prox output, so
    # zeroed coordinates are exact zeros
    primal_residual = float(np.linalg.norm(beta[res.Mc] - theta))
    beta = beta.copy()
    beta[res.Mc] = theta

    if res.constrained:
        # minimal-norm adjustment of the tested block onto C beta_M = t
        C, t = hypothesis.C, hypothesis.t
        resid = C @ beta[res.M] - t
        beta[res.M] -= C.T @ np.linalg.solve(C @ C.T, resid)

    support = res.Mc[np.abs(beta[res.Mc]) > SUPPORT_THRESHOLD]
    objective = model.loss(data, beta) + float(
        np.sum(rho(penalty, beta[res.Mc]))
    )
    c_res = constraint_residual(hypothesis, beta) if hypothesis is not None else 0.0
    return FitResult(
        beta=beta,
        support=support,
        lam=penalty.lam,
        converged=converged,
        iterations=iterations,
        constraint_residual=c_res,
        objective=objective,
        primal_residual=primal_residual,
        diagnostics=tuple(diagnostics),
    )


def bic(data, beta):
    """n * loss + c_n * ||beta||_0 with c_n = max(log n, loglog n * log p)."""
    beta = np.asarray(beta, dtype=float)
    n, p = data.n, data.p
    c_n = max(np.log(n), np.log(np.log(n)) * np.log(p))
    k = int(np.sum(np.abs(beta) > SUPPORT_THRESHOLD))
    return float(n * model.loss(data, beta) + c_n * k)


def default_lambda_grid():
    """41 log-equispaced values from e^-2.5 to e^0.5."""
    return np.exp(np.linspace(-2.5, 0.5, 41))


def select_lambda(data, penalty_family, grid, hypothesis=None,
                  null_constrained=False, config=SolverConfig(),
                  beta_init=None, shape=None):
    """Fit every lambda on the grid and return the BIC-minimizing fit.

    The sweep runs from the largest lambda down, warm-starting each fit
    from the previous solution; ties in BIC break toward larger lambda.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid must be nonempty")
    if beta_init is None:
        beta_init = np.zeros(data.p)
    # radii are fixed by the original initializer, not by warm starts
    if config.r1 is None or config.r2 is None:
        radii = default_radii(beta_init)
        config = replace(config, r1=radii.R1, r2=radii.R2)

    best = None
    best_bic = np.inf
    warm = np.asarray(beta_init, dtype=float)
    errors = []
    for lam in np.sort(grid)[::-1]:
        spec = PenaltySpec(penalty_family, lam, shape)
        try:
            fit = admm_fit(data, spec, hypothesis, null_constrained, config, warm)
        except PoismerError as exc:
            errors.append((lam, exc))
            continue
        warm = fit.beta
        score = bic(data, fit.beta)
        if score < best_bic:  # strict: ties keep the earlier (larger) lambda
            best, best_bic = fit, score
    if best is None:
        raise AllFitsFailed(f"all {len(grid)} grid fits failed: {errors[-1][1]}")
    return best
