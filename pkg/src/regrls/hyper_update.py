"""Projected gradient step on the hyperparameters.

The descent direction is ``psi = 2 * dJ/deta`` where ``J = -log L`` is the
negative marginal log-likelihood; in the primed basis its entries are
``1 - (theta'_k**2 + sigma2 * F'_kk) / exp(eta_k)``.  The direction is
projected onto affine-in-index vectors (the null space of the
second-difference operator ``C``) so the step keeps ``eta`` affine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prior import HyperVector, safe_exp

#: smallest decay rate ``eta[0] - eta[1]`` allowed after a step
ALPHA_MIN = 1e-6


def second_difference_matrix(n: int) -> np.ndarray:
    """``(n-2) x n`` matrix with rows ``[.., 1, -2, 1, ..]``."""
    C = np.zeros((max(n - 2, 0), n))
    for i in range(n - 2):
        C[i, i : i + 3] = (1.0, -2.0, 1.0)
    return C


@dataclass(frozen=True)
class ProjectionContext:
    n: int
    epsilon: float = 1e-4
    gamma: float = 1.0
    C: np.ndarray = field(init=False, repr=False)
    P: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        C = second_difference_matrix(self.n)
        if self.n >= 3:
            P = np.eye(self.n) - C.T @ np.linalg.solve(C @ C.T, C)
            P = 0.5 * (P + P.T)
        else:
            P = np.eye(self.n)
        for arr in (C, P):
            arr.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class GradientReport:
    psi: np.ndarray
    psi_projected: np.ndarray
    fallback_used: bool


def compute_psi(theta_prime, F_prime_diag, eta, sigma2: float) -> np.ndarray:
    """Twice the gradient of ``-log L`` with respect to ``eta``."""
    eta = eta.eta if isinstance(eta, HyperVector) else np.asarray(eta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    F_prime_diag = np.asarray(F_prime_diag, dtype=float)
    return 1.0 - (theta_prime**2 + sigma2 * F_prime_diag) * safe_exp(-eta)


def project_psi(ctx: ProjectionContext, psi) -> GradientReport:
    """Project ``psi`` onto affine sequences, enforcing a decay-preserving slope.

    When the projected direction would not widen the gap ``eta[0] - eta[1]``
    it is replaced by ``psi*[0] - k * epsilon``, which shrinks the gap by
    ``gamma * epsilon`` per step.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (ctx.n,):
        raise ValueError(f"psi has shape {psi.shape}, expected ({ctx.n},)")
    star = ctx.P @ psi
    if ctx.n < 2 or star[0] < star[1]:
        return GradientReport(psi=psi, psi_projected=star, fallback_used=False)
    fallback = star[0] - ctx.epsilon * np.arange(ctx.n, dtype=float)
    return GradientReport(psi=psi, psi_projected=fallback, fallback_used=True)


def eta_step(ctx: ProjectionContext, eta: HyperVector, psi_projected, gamma: float | None = None) -> HyperVector:
    """``eta - gamma * psi_p``, re-expressed exactly as ``level - k * alpha``.

    ``alpha`` is clamped to at least :data:`ALPHA_MIN` so the ordering
    constraint survives repeated fallback steps.
    """
    gamma = ctx.gamma if gamma is None else gamma
    psi_projected = np.asarray(psi_projected, dtype=float)
    if gamma == 0 or not np.any(psi_projected):
        return eta
    new = eta.eta - gamma * np.asarray(psi_projected, dtype=float)
    if ctx.n == 1:
        return HyperVector(new)
    level = new[0]
    alpha = max(new[0] - new[1], ALPHA_MIN)
    return HyperVector.affine(level, alpha, ctx.n)
