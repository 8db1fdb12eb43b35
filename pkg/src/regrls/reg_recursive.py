"""Regularized recursive least squares with online hyperparameter estimation.

The estimator works in the coordinates ``theta' = U^-1 theta`` and
``phi' = U^T phi`` where the prior covariance is the diagonal
``W = diag(exp(eta))``.  Each sample performs

1. an RLS measurement update of ``theta'`` and ``F'`` with ``phi'``;
2. a projected gradient step ``eta <- eta - gamma * psi_p`` on the negative
   marginal log-likelihood, evaluated at the post-measurement ``theta', F'``;
3. a re-linearization of ``theta', F'`` for the new prior, using a truncated
   Neumann expansion of ``(F'^-1 + sigma2 * Delta)^-1`` with
   ``Delta = W^-1(eta_new) - W^-1(eta_old)``.

With ``gamma = 0`` this reduces to RLS initialized at ``F(0) = Pi(eta0) / sigma2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import prior
from .errors import StepRejectedError
from .hyper_update import GradientReport, ProjectionContext, compute_psi, eta_step, project_psi
from .rls_baseline import check_finite, rank_one_update

logger = logging.getLogger(__name__)

#: number of times the gain is halved before a hyperparameter step is skipped
MAX_STEP_HALVINGS = 5


@dataclass(frozen=True)
class RegEstimatorState:
    theta_prime: np.ndarray
    F_prime: np.ndarray
    eta: prior.HyperVector
    sigma2: float
    t: int = 0
    correction_order: int = 1
    max_updates: int | None = None

    @property
    def n(self) -> int:
        return self.theta_prime.size

    @property
    def theta_hat(self) -> np.ndarray:
        """FIR taps in the original coordinates, ``U theta'``."""
        return prior.apply_U(self.theta_prime)

    @property
    def F(self) -> np.ndarray:
        """Gain in the original coordinates, ``U F' U^T`` (dense, for inspection)."""
        U = prior.build_U(self.n)
        return U @ self.F_prime @ U.T


@dataclass(frozen=True)
class StepDiagnostics:
    epsilon_o: float
    report: GradientReport | None
    alpha: float
    gamma_used: float
    rejections: int
    sq_error: float
    penalty: float
    trace_term: float

    @property
    def psi(self):
        return None if self.report is None else self.report.psi

    @property
    def psi_projected(self):
        return None if self.report is None else self.report.psi_projected


def reg_init(
    n: int,
    eta0: prior.HyperVector,
    sigma2: float,
    correction_order: int = 1,
    max_updates: int | None = None,
) -> RegEstimatorState:
    """Zero estimate with ``F'(0) = W(eta0) / sigma2``."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if correction_order < 1:
        raise ValueError(f"correction_order must be >= 1, got {correction_order}")
    if max_updates is not None and max_updates < 1:
        raise ValueError(f"max_updates must be >= 1, got {max_updates}")
    if not isinstance(eta0, prior.HyperVector):
        eta0 = prior.HyperVector(eta0)
    if eta0.n != n:
        raise ValueError(f"eta0 has {eta0.n} entries, expected {n}")
    eta0.validate()
    return RegEstimatorState(
        theta_prime=np.zeros(n),
        F_prime=np.diag(eta0.variances() / sigma2),
        eta=eta0,
        sigma2=float(sigma2),
        t=0,
        correction_order=correction_order,
        max_updates=max_updates,
    )


def measurement_update(state: RegEstimatorState, phi, y_next) -> tuple[RegEstimatorState, float]:
    """RLS update in the primed basis; returns the a priori error."""
    phi, y_next = check_finite(phi, y_next)
    if phi.shape != (state.n,):
        raise ValueError(f"regressor has shape {phi.shape}, expected ({state.n},)")
    phi_prime = prior.apply_Ut(phi)
    theta, F, eps = rank_one_update(state.theta_prime, state.F_prime, phi_prime, y_next)
    return replace(state, theta_prime=theta, F_prime=F, t=state.t + 1), eps


def _neumann_apply(X: np.ndarray, B: np.ndarray, order: int) -> np.ndarray:
    """``sum_{j=0..order} (-X)^j B``."""
    term = B
    acc = B.copy()
    for _ in range(order):
        term = -(X @ term)
        acc = acc + term
    return acc


def hyper_relinearize(state: RegEstimatorState, eta_new: prior.HyperVector) -> RegEstimatorState:
    """Move ``theta'`` and ``F'`` from the prior ``W(eta)`` to ``W(eta_new)``.

    The exact targets are ``F'_new = (F'^-1 + sigma2 Delta)^-1`` and
    ``theta'_new = F'_new F'^-1 theta'``; both equal ``(I + X)^-1`` applied to
    the old values with ``X = sigma2 F' Delta``, which is expanded to
    ``state.correction_order`` terms.  Order 1 gives
    ``F' - sigma2 F' Delta F'`` and ``(I - sigma2 F' Delta) theta'``.

    If ``state.max_updates`` is set, only that many entries of ``Delta``
    (largest magnitude first) are applied, which bounds the cost at
    ``O(n^2 * max_updates)``.

    Raises:
        StepRejectedError: the corrected gain is not positive definite.
    """
    if not isinstance(eta_new, prior.HyperVector):
        eta_new = prior.HyperVector(eta_new)
    delta = eta_new.inverse_variances() - state.eta.inverse_variances()
    if not np.any(delta):
        return replace(state, eta=eta_new)

    cols = np.flatnonzero(delta)
    if state.max_updates is not None and cols.size > state.max_updates:
        cols = cols[np.argsort(-np.abs(delta[cols]), kind="stable")[: state.max_updates]]

    Fp = state.F_prime
    # X = sigma2 F' Delta has nonzero columns only at `cols`
    Xc = state.sigma2 * Fp[:, cols] * delta[cols]
    if state.correction_order == 1:
        F_new = Fp - Xc @ Fp[cols, :]
        theta_new = state.theta_prime - Xc @ state.theta_prime[cols]
    else:
        X = np.zeros_like(Fp)
        X[:, cols] = Xc
        F_new = _neumann_apply(X, Fp, state.correction_order)
        theta_new = _neumann_apply(X, state.theta_prime, state.correction_order)
    F_new = 0.5 * (F_new + F_new.T)

    if not (np.all(np.isfinite(F_new)) and np.all(np.isfinite(theta_new))):
        raise StepRejectedError("re-linearized estimate is not finite")
    try:
        np.linalg.cholesky(F_new)
    except np.linalg.LinAlgError as exc:
        raise StepRejectedError("re-linearized gain lost positive definiteness") from exc
    return replace(state, theta_prime=theta_new, F_prime=F_new, eta=eta_new)


def step(
    state: RegEstimatorState,
    phi,
    y_next,
    ctx: ProjectionContext,
) -> tuple[RegEstimatorState, StepDiagnostics]:
    """Measurement update followed by one hyperparameter step.

    A step whose re-linearization is rejected is retried with ``gamma``
    halved, at most :data:`MAX_STEP_HALVINGS` times; after that the
    hyperparameters are left unchanged for this sample.
    """
    if ctx.n != state.n:
        raise ValueError(f"projection context is for n={ctx.n}, state has n={state.n}")
    state, eps = measurement_update(state, phi, y_next)

    report = None
    gamma_used = 0.0
    rejections = 0
    if ctx.gamma > 0:
        psi = compute_psi(state.theta_prime, np.diag(state.F_prime), state.eta, state.sigma2)
        report = project_psi(ctx, psi)
        gamma = ctx.gamma
        for _ in range(MAX_STEP_HALVINGS + 1):
            candidate = eta_step(ctx, state.eta, report.psi_projected, gamma=gamma)
            try:
                state = hyper_relinearize(state, candidate)
            except StepRejectedError:
                rejections += 1
                gamma *= 0.5
                continue
            gamma_used = gamma
            break
        else:
            logger.info("hyperparameter step skipped at t=%d after %d rejections", state.t, rejections)

    winv = state.eta.inverse_variances()
    diag = StepDiagnostics(
        epsilon_o=eps,
        report=report,
        alpha=state.eta.alpha,
        gamma_used=gamma_used,
        rejections=rejections,
        sq_error=eps * eps,
        penalty=state.sigma2 * float(np.sum(state.theta_prime**2 * winv)),
        trace_term=state.sigma2 * float(np.sum(np.diag(state.F_prime) * winv)),
    )
    return state, diag


def run(state: RegEstimatorState, Phi, Y, ctx: ProjectionContext) -> RegEstimatorState:
    for phi, y in zip(Phi, Y):
        state, _ = step(state, phi, y, ctx)
    return state
