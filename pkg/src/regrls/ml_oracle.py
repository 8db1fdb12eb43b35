"""Batch ground truth: regularized least squares and the marginal likelihood.

Everything here works on the full data matrix and is meant for checking the
recursive estimators, not for running inside them.

Data bookkeeping: row ``i`` of ``Phi`` is the regressor paired with
measurement ``Y[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import prior
from .errors import SingularityError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class BatchProblem:
    Phi: np.ndarray
    Y: np.ndarray
    sigma2: float
    Pi: np.ndarray

    def __post_init__(self):
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        Pi = np.atleast_2d(np.asarray(self.Pi, dtype=float))
        if Phi.size == 0:
            Phi = np.zeros((0, Pi.shape[0]))
        if Phi.shape[0] != Y.size:
            raise ValueError(f"Phi has {Phi.shape[0]} rows but Y has {Y.size} entries")
        if Pi.shape != (Phi.shape[1], Phi.shape[1]):
            raise ValueError(f"Pi has shape {Pi.shape}, expected {(Phi.shape[1],) * 2}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Pi", Pi)

    @classmethod
    def from_eta(cls, Phi, Y, sigma2: float, eta) -> BatchProblem:
        return cls(Phi, Y, sigma2, prior.build_pi(prior.PriorSpec.from_eta(eta)))

    @property
    def n(self) -> int:
        return self.Pi.shape[0]

    @property
    def t(self) -> int:
        return self.Y.size


def _chol(M, what: str):
    try:
        return cho_factor(M, lower=True)
    except LinAlgError as exc:
        raise SingularityError(f"{what} is not positive definite") from exc


def _logdet(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def _information(p: BatchProblem):
    """Factor of ``Phi^T Phi + sigma2 Pi^-1`` and the Cholesky factor of ``Pi``."""
    pi_fac = _chol(p.Pi, "Pi")
    Pi_inv = cho_solve(pi_fac, np.eye(p.n))
    A = p.Phi.T @ p.Phi + p.sigma2 * Pi_inv
    return _chol(0.5 * (A + A.T), "information matrix"), pi_fac


def batch_solve(p: BatchProblem) -> tuple[np.ndarray, np.ndarray]:
    """Regularized least-squares estimate and its gain matrix.

    ``F = (Phi^T Phi + sigma2 Pi^-1)^-1`` and ``theta = F Phi^T Y``.
    """
    a_fac, _ = _information(p)
    theta = cho_solve(a_fac, p.Phi.T @ p.Y)
    F = cho_solve(a_fac, np.eye(p.n))
    return theta, 0.5 * (F + F.T)


def batch_solve_primed(Phi, Y, sigma2: float, eta) -> tuple[np.ndarray, np.ndarray]:
    """Same estimate in the coordinates where the prior is ``W = diag(exp(eta))``.

    Solved directly from ``Phi' = Phi U`` and ``sigma2 W^-1`` rather than by
    transforming the output of :func:`batch_solve`.
    """
    hv = eta if isinstance(eta, prior.HyperVector) else prior.HyperVector(eta)
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float)).reshape(-1, hv.n)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    Phi_p = np.cumsum(Phi, axis=1)  # rows are U^T phi
    A = Phi_p.T @ Phi_p + sigma2 * np.diag(hv.inverse_variances())
    a_fac = _chol(A, "primed information matrix")
    theta_p = cho_solve(a_fac, Phi_p.T @ Y)
    F_p = cho_solve(a_fac, np.eye(hv.n))
    return theta_p, 0.5 * (F_p + F_p.T)


def neg_log_marginal(p: BatchProblem, method: str = "woodbury") -> float:
    """``-log L`` for ``Y ~ N(0, Phi Pi Phi^T + sigma2 I)``.

    ``method="woodbury"`` (default) works with ``n x n`` factorizations only,
    via the inversion lemma and the determinant identity
    ``|Sigma| = sigma2^t |Pi| |Phi^T Phi + sigma2 Pi^-1|``.
    ``method="direct"`` factors the ``t x t`` covariance and exists for
    cross-checking.
    """
    t = p.t
    if t == 0:
        return 0.0
    if method == "direct":
        Sigma = p.Phi @ p.Pi @ p.Phi.T + p.sigma2 * np.eye(t)
        s_fac = _chol(0.5 * (Sigma + Sigma.T), "Sigma")
        quad = float(p.Y @ cho_solve(s_fac, p.Y))
        logdet = _logdet(s_fac)
    elif method == "woodbury":
        a_fac, pi_fac = _information(p)
        b = p.Phi.T @ p.Y
        theta = cho_solve(a_fac, b)
        quad = float(p.Y @ p.Y - b @ theta) / p.sigma2
        logdet = t * np.log(p.sigma2) + _logdet(a_fac) + _logdet(pi_fac) - p.n * np.log(p.sigma2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (t * LOG_2PI + logdet + quad)


def prior_pi_inv_derivatives(eta) -> np.ndarray:
    """Stack of ``d Pi^-1 / d eta_k`` for the ``U W U^T`` prior, shape ``(n, n, n)``.

    ``d W^-1 / d eta_k = -exp(-eta_k) e_k e_k^T`` conjugated by ``U^-T``
    and ``U^-1``, i.e. a scaled outer product of ``U^-T e_k``.
    """
    hv = eta if isinstance(eta, prior.HyperVector) else prior.HyperVector(eta)
    n = hv.n
    winv = hv.inverse_variances()
    out = np.empty((n, n, n))
    for k in range(n):
        v = prior.apply_Ut_inv(np.eye(n)[k])
        out[k] = -winv[k] * np.outer(v, v)
    return out


def exact_gradient(p: BatchProblem, dPi_inv) -> np.ndarray:
    """Gradient of ``log L`` for a general parameterized ``Pi``.

    Component ``k`` is ``0.5 * Tr([(Pi - theta theta^T) - sigma2 F] dPi^-1/deta_k)``
    with ``theta, F`` from :func:`batch_solve`.
    """
    dPi_inv = np.asarray(dPi_inv, dtype=float)
    if dPi_inv.ndim != 3 or dPi_inv.shape[1:] != (p.n, p.n):
        raise ValueError(f"dPi_inv must have shape (m, {p.n}, {p.n}), got {dPi_inv.shape}")
    theta, F = batch_solve(p)
    M = p.Pi - np.outer(theta, theta) - p.sigma2 * F
    # Tr(M D_k) for symmetric M
    return 0.5 * np.einsum("ij,kji->k", M, dPi_inv)


def primed_gradient(theta_p, F_p, eta, sigma2: float) -> np.ndarray:
    """Gradient of ``log L`` written in the primed coordinates.

    ``0.5 * Tr((W - theta' theta'^T - sigma2 F') dW^-1/deta_k)`` evaluated with
    dense matrices; the closed form is ``-0.5 * psi``.
    """
    hv = eta if isinstance(eta, prior.HyperVector) else prior.HyperVector(eta)
    n = hv.n
    M = np.diag(hv.variances()) - np.outer(theta_p, theta_p) - sigma2 * np.asarray(F_p)
    winv = hv.inverse_variances()
    grad = np.empty(n)
    for k in range(n):
        dWinv = np.zeros((n, n))
        dWinv[k, k] = -winv[k]
        grad[k] = 0.5 * np.trace(M @ dWinv)
    return grad


def neg_log_marginal_eta(Phi, Y, sigma2: float, eta, method: str = "woodbury") -> float:
    """:func:`neg_log_marginal` as a function of the hyperparameters."""
    return neg_log_marginal(BatchProblem.from_eta(Phi, Y, sigma2, eta), method=method)


def finite_difference_gradient(Phi, Y, sigma2: float, eta, step: float = 1e-5) -> np.ndarray:
    """Central differences of ``-log L`` with respect to each ``eta_k``."""
    eta = np.asarray(eta.eta if isinstance(eta, prior.HyperVector) else eta, dtype=float)
    grad = np.empty(eta.size)
    for k in range(eta.size):
        hi, lo = eta.copy(), eta.copy()
        hi[k] += step
        lo[k] -= step
        grad[k] = (neg_log_marginal_eta(Phi, Y, sigma2, hi) - neg_log_marginal_eta(Phi, Y, sigma2, lo)) / (2 * step)
    return grad
