"""Penalized estimation and testing for Poisson regression with noisy
covariates."""

from .constraints import (FeasibleSet, HypothesisSpec, constraint_residual,
                          project_l1, shrink_l2)
from .errors import (AllFitsFailed, DimensionMismatch, ExponentOverflow,
                     IllConditioned, InsufficientReplicates, MaxIterations,
                     NonConvexProx, PoismerError, SingularHessian)
from .inference import (TestResult, bh_fdr, chisq_sf, psi, score_test,
                        wald_test)
from .model import (Dataset, corrected_score_oracle, gradient, hessian, loss,
                    sigma_hat)
from .panel import (LongitudinalPanel, embed_omega, estimate_omega, predict,
                    prediction_error)
from .penalty import PenaltySpec, prox, q_lambda, rho, rho_prime
from .simulation import (SimDesign, SizePowerRow, gen_covariates, gen_outcome,
                         naive_comparison, run_experiment)
from .solver import (FitResult, SolverConfig, admm_fit, bic, default_lambda_grid,
                     default_radii, newton_subproblem, select_lambda)

__version__ = "0.1.0"
