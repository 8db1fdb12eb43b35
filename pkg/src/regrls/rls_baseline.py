"""Plain recursive least squares (no forgetting), used as the comparison baseline."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class RlsState:
    theta_hat: np.ndarray
    F: np.ndarray
    t: int = 0


def rls_init(n: int, f0_diag: float) -> RlsState:
    """Zero estimate with gain ``F(0) = f0_diag * I``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not f0_diag > 0:
        raise ValueError(f"f0_diag must be positive, got {f0_diag}")
    return RlsState(theta_hat=np.zeros(n), F=f0_diag * np.eye(n), t=0)


def rank_one_update(theta, F, phi, y_next) -> tuple[np.ndarray, np.ndarray, float]:
    """One matrix-inversion-lemma step shared by both estimators.

    Returns ``(theta+, F+, eps)`` where ``eps = y_next - phi @ theta`` is the
    a priori prediction error.  ``F+`` is symmetrized.
    """
    eps = float(y_next - phi @ theta)
    Fphi = F @ phi
    denom = 1.0 + phi @ Fphi
    theta_new = theta + Fphi * (eps / denom)
    F_new = F - np.outer(Fphi, Fphi) / denom
    F_new = 0.5 * (F_new + F_new.T)
    return theta_new, F_new, eps


def check_finite(phi, y_next) -> tuple[np.ndarray, float]:
    phi = np.asarray(phi, dtype=float)
    y_next = float(y_next)
    if not (np.all(np.isfinite(phi)) and np.isfinite(y_next)):
        raise NumericError("non-finite regressor or measurement")
    return phi, y_next


def rls_step(state: RlsState, phi, y_next) -> tuple[RlsState, float]:
    """Advance the estimate with the pair ``(phi, y_next)``.

    Returns the new state and the a priori error ``y_next - phi @ theta_hat``.
    """
    phi, y_next = check_finite(phi, y_next)
    if phi.shape != state.theta_hat.shape:
        raise ValueError(f"regressor has shape {phi.shape}, expected {state.theta_hat.shape}")
    theta, F, eps = rank_one_update(state.theta_hat, state.F, phi, y_next)
    return replace(state, theta_hat=theta, F=F, t=state.t + 1), eps


def run_rls(state: RlsState, Phi, Y) -> RlsState:
    for phi, y in zip(Phi, Y):
        state, _ = rls_step(state, phi, y)
    return state
