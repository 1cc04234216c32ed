"""Noise-covariance estimation from repeated measures, and prediction."""

import numpy as np
from dataclasses import dataclass

from .errors import DimensionMismatch, ExponentOverflow, InsufficientReplicates
from .model import EXP_GUARD

__all__ = ["LongitudinalPanel", "estimate_omega", "embed_omega", "predict",
           "prediction_error"]


@dataclass(frozen=True)
class LongitudinalPanel:
    """Subject-visit feature panel used to estimate the noise covariance.

    Rows of ``features`` are subject-visits; ``age`` is the detrending
    regressor recorded at each visit.
    """

    subject_id: np.ndarray
    visit_index: np.ndarray
    features: np.ndarray
    age: np.ndarray

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=float))
        sid = np.asarray(self.subject_id)
        visit = np.asarray(self.visit_index, dtype=int)
        age = np.asarray(self.age, dtype=float)
        rows = features.shape[0]
        if sid.shape != (rows,) or visit.shape != (rows,) or age.shape != (rows,):
            raise DimensionMismatch("panel columns must share the row count")
        object.__setattr__(self, "subject_id", sid)
        object.__setattr__(self, "visit_index", visit)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "age", age)


def estimate_omega(panel):
    """Within-subject covariance of age-detrended features.

    Each feature is regressed on age (simple linear regression with
    intercept) across all subject-visits; the pooled within-subject
    scatter of the residuals, divided by the total degrees of freedom
    sum(n_i - 1), estimates the measurement-error covariance.
    """
    X = np.column_stack([np.ones(len(panel.age)), panel.age])
    coefs, *_ = np.linalg.lstsq(X, panel.features, rcond=None)
    resid = panel.features - X @ coefs

    p = resid.shape[1]
    scatter = np.zeros((p, p))
    dof = 0
    for sid in np.unique(panel.subject_id):
        rows = resid[panel.subject_id == sid]
        ni = rows.shape[0]
        if ni < 2:
            continue
        centered = rows - rows.mean(axis=0)
        scatter += centered.T @ centered
        dof += ni - 1
    if dof < 1:
        raise InsufficientReplicates("no subject has two or more visits")
    omega = scatter / dof
    return (omega + omega.T) / 2


def embed_omega(omega, p, error_free=()):
    """Embed a smaller covariance into p x p with zero rows/columns at the
    error-free covariate positions."""
    error_free = np.asarray(sorted(error_free), dtype=int)
    q = omega.shape[0]
    if q + len(error_free) != p:
        raise DimensionMismatch("omega size plus error-free count must equal p")
    keep = np.setdiff1d(np.arange(p), error_free)
    out = np.zeros((p, p))
    out[np.ix_(keep, keep)] = omega
    return out


def predict(beta, W_new, omega, half=True):
    """Predicted Poisson mean for each row of W_new.

    ``half=True`` uses the conditionally unbiased exponent
    b'W - b'Omega b / 2; ``half=False`` drops the 1/2 factor.
    """
    beta = np.asarray(beta, dtype=float)
    W_new = np.atleast_2d(np.asarray(W_new, dtype=float))
    omega = np.asarray(omega, dtype=float)
    if W_new.shape[1] != len(beta) or omega.shape != (len(beta), len(beta)):
        raise DimensionMismatch("beta, W_new and omega dimensions disagree")
    quad = beta @ omega @ beta
    expo = W_new @ beta - (quad / 2 if half else quad)
    if expo.size and np.max(expo) > EXP_GUARD:
        raise ExponentOverflow("prediction exponent exceeds guard")
    return np.exp(expo)


def prediction_error(y, y_hat):
    """Relative absolute error sum |y - yhat| / |y| over nonzero y."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise DimensionMismatch("y and y_hat must have the same shape")
    return float(np.sum(np.abs(y - y_hat) / np.abs(y)))
