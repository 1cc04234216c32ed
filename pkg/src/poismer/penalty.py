"""SCAD and MCP penalties, their derivatives and scalar prox.

Both families are folded-concave regularizers with a flat tail: the
derivative vanishes beyond ``shape * lam``, which removes the shrinkage
bias on large coefficients.  The weak-convexity constant ``mu`` (1/(a-1)
for SCAD, 1/gamma for MCP) bounds how nonconvex each penalty is.
"""

import numpy as np
from dataclasses import dataclass

from .errors import NonConvexProx

SCAD = "scad"
MCP = "mcp"

__all__ = ["PenaltySpec", "rho", "rho_prime", "q_lambda", "prox", "prox_vector"]


@dataclass(frozen=True)
class PenaltySpec:
    family: str
    lam: float
    shape: float = None

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in (SCAD, MCP):
            raise ValueError(f"unknown penalty family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.shape is None:
            object.__setattr__(self, "shape", 3.7 if fam == SCAD else 3.0)
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if fam == SCAD and self.shape <= 2:
            raise ValueError("SCAD requires shape a > 2")
        if fam == MCP and self.shape <= 1:
            raise ValueError("MCP requires shape gamma > 1")

    @property
    def mu(self):
        """Weak-convexity constant: rho(t) + mu t^2 / 2 is convex."""
        if self.family == SCAD:
            return 1.0 / (self.shape - 1.0)
        return 1.0 / self.shape


def rho(spec, t):
    """Penalty value; symmetric, zero at zero, constant beyond shape*lam."""
    lam, a = spec.lam, spec.shape
    t = np.abs(t)
    if spec.family == SCAD:
        return np.where(
            t <= lam,
            lam * t,
            np.where(
                t <= a * lam,
                (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1)),
                (a + 1) * lam * lam / 2,
            ),
        )[()]
    return np.where(t <= a * lam, lam * t - t * t / (2 * a), a * lam * lam / 2)[()]


def rho_prime(spec, t):
    """Derivative of the penalty.

    At t = 0 the penalty is only sub-differentiable with sub-differential
    [-lam, lam]; this returns the one-sided limit lam there.  The solver
    never evaluates it at exactly zero.
    """
    lam, a = spec.lam, spec.shape
    s = np.where(np.asarray(t) < 0, -1.0, 1.0)
    t = np.abs(t)
    if spec.family == SCAD:
        d = np.where(
            t <= lam, lam, np.where(t <= a * lam, (a * lam - t) / (a - 1), 0.0)
        )
    else:
        d = np.where(t <= a * lam, lam - t / a, 0.0)
    return (s * d)[()]


def q_lambda(spec, t):
    """Auxiliary remainder lam*|t| - rho(t); q - mu t^2/2 is concave."""
    return spec.lam * np.abs(t) - rho(spec, t)


def _piece_candidates(spec, z, weight):
    """Stationary points of rho(theta) + weight/2 (theta - z)^2 on each
    polynomial piece, clipped into the piece (z >= 0 assumed)."""
    lam, a, w = spec.lam, spec.shape, weight
    if spec.family == SCAD:
        cands = [
            min(max(z - lam / w, 0.0), lam),  # linear zone
            a * lam,  # boundary fallback for the middle zone
            max(z, a * lam),  # flat tail
        ]
        denom = w * (a - 1) - 1.0
        if denom != 0.0:
            mid = (w * z * (a - 1) - a * lam) / denom
            cands.append(min(max(mid, lam), a * lam))
    else:
        cands = [max(z, a * lam)]
        denom = w - 1.0 / a
        if denom != 0.0:
            lin = (w * z - lam) / denom
            cands.append(min(max(lin, 0.0), a * lam))
        cands.append(0.0)
    return cands


def prox(spec, z, weight):
    """Global minimizer of rho(theta) + weight/2 (theta - z)^2.

    Requires weight > mu so the scalar objective is strictly convex.
    """
    if weight <= spec.mu:
        raise NonConvexProx(
            f"prox weight {weight} must exceed the weak-convexity "
            f"constant {spec.mu:.6g}"
        )
    s = -1.0 if z < 0 else 1.0
    z = abs(z)
    best, best_val = 0.0, np.inf
    for cand in _piece_candidates(spec, z, weight):
        val = float(rho(spec, cand)) + 0.5 * weight * (cand - z) ** 2
        if val < best_val:
            best, best_val = cand, val
    return s * best


def prox_vector(spec, z, weight):
    """Elementwise prox; used for the penalty update inside the solver."""
    z = np.asarray(z, dtype=float)
    if weight <= spec.mu:
        raise NonConvexProx(
            f"prox weight {weight} must exceed the weak-convexity "
            f"constant {spec.mu:.6g}"
        )
    lam, a, w = spec.lam, spec.shape, weight
    s = np.sign(z)
    t = np.abs(z)
    if spec.family == SCAD:
        soft = np.clip(t - lam / w, 0.0, lam)
        denom = w * (a - 1) - 1.0
        mid = np.clip((w * t * (a - 1) - a * lam) / denom, lam, a * lam)
        tail = np.maximum(t, a * lam)
        cands = np.stack([soft, mid, tail])
    else:
        denom = w - 1.0 / a
        lin = np.clip((w * t - lam) / denom, 0.0, a * lam)
        tail = np.maximum(t, a * lam)
        cands = np.stack([lin, tail])
    vals = rho(spec, cands) + 0.5 * w * (cands - t[None, :]) ** 2
    pick = np.argmin(vals, axis=0)
    return s * np.take_along_axis(cands, pick[None, :], axis=0)[0]
