"""Feasible-set geometry and linear-equality hypothesis specifications."""

import json

import numpy as np
from dataclasses import dataclass

from .errors import DimensionMismatch

__all__ = [
    "HypothesisSpec",
    "FeasibleSet",
    "project_l1",
    "shrink_l2",
    "constraint_residual",
]


@dataclass(frozen=True)
class HypothesisSpec:
    """Linear hypothesis C beta_M = t on the tested index set M.

    ``M`` holds 0-based coordinate indices internally; the JSON wire
    format uses 1-based indices.
    """

    C: np.ndarray
    t: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        M = np.asarray(self.M, dtype=int)
        r, m = C.shape
        if t.shape != (r,):
            raise DimensionMismatch("t must have length r")
        if M.shape != (m,):
            raise DimensionMismatch("M must have length m")
        if len(np.unique(M)) != m or np.any(M < 0):
            raise ValueError("M indices must be distinct and nonnegative")
        if r > m:
            raise ValueError("C must have no more rows than columns")
        sv = np.linalg.svd(C, compute_uv=False)
        if np.sum(sv > 1e-10 * max(1.0, sv[0])) != r:
            raise ValueError("C is not of full row rank (tolerance 1e-10)")
        order = np.argsort(M)  # keep M sorted; permute C columns to match
        object.__setattr__(self, "C", np.ascontiguousarray(C[:, order]))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "M", M[order])

    @property
    def r(self):
        return self.C.shape[0]

    @property
    def m(self):
        return self.C.shape[1]

    def complement(self, p):
        """Indices not in M, in increasing order."""
        mask = np.ones(p, dtype=bool)
        if np.any(self.M >= p):
            raise DimensionMismatch("M index out of range")
        mask[self.M] = False
        return np.nonzero(mask)[0]

    def to_json(self):
        return json.dumps(
            {
                "C": self.C.tolist(),
                "t": self.t.tolist(),
                "M": (self.M + 1).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        M = np.asarray(obj["M"], dtype=int)
        if np.any(M < 1):
            raise ValueError("JSON M indices are 1-based and must be >= 1")
        return cls(C=np.asarray(obj["C"]), t=np.asarray(obj["t"]), M=M - 1)


@dataclass(frozen=True)
class FeasibleSet:
    """L1/L2 ball radii defining the solver's feasible region."""

    R1: float
    R2: float

    def __post_init__(self):
        if self.R1 <= 0 or self.R2 <= 0:
            raise ValueError("radii must be positive")


def project_l1(v, R1):
    """Euclidean projection onto the L1 ball of radius R1.

    Sort-based thresholding; O(p log p), plenty fast for p <= 600.
    """
    v = np.asarray(v, dtype=float)
    if R1 <= 0:
        raise ValueError("R1 must be positive")
    a = np.abs(v)
    if a.sum() <= R1:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - R1
    idx = np.arange(1, len(u) + 1)
    k = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[k] / (k + 1)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def shrink_l2(v, R2):
    """Rescale v onto the L2 ball of radius R2 when it lies outside."""
    v = np.asarray(v, dtype=float)
    if R2 <= 0:
        raise ValueError("R2 must be positive")
    nrm = np.linalg.norm(v)
    if nrm <= R2:
        return v.copy()
    return v * (R2 / nrm)


def constraint_residual(spec, beta):
    """Max-norm violation of C beta_M = t."""
    beta = np.asarray(beta, dtype=float)
    if np.any(spec.M >= len(beta)):
        raise DimensionMismatch("M index out of range for beta")
    return float(np.max(np.abs(spec.C @ beta[spec.M] - spec.t)))
