"""Regularization matrix ``Pi = U diag(exp(eta)) U^T`` and its constraints.

``U`` is the upper-triangular all-ones matrix.  Products with ``U``, ``U^T``
and their inverses are never formed densely on the estimation path: they
reduce to suffix sums, prefix sums and first differences (``O(n)``).

The hyperparameters are log-variances constrained to be affine in the tap
index with a negative slope::

    eta[k] = eta[0] - k * alpha,   alpha > 0

so that ``W`` is a geometrically decaying diagonal (a DI kernel in the
transformed coordinates) and ``Pi`` is a stable prior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError

logger = logging.getLogger(__name__)

#: absolute tolerance on the second differences of ``eta``
C2_TOL = 1e-12
#: bound applied to log-variances before exponentiation
ETA_CLAMP = 700.0


def safe_exp(x) -> np.ndarray:
    """``exp`` with the argument clamped to ``[-700, 700]``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > ETA_CLAMP):
        logger.warning("log-variance outside [-%g, %g] clamped before exp", ETA_CLAMP, ETA_CLAMP)
        x = np.clip(x, -ETA_CLAMP, ETA_CLAMP)
    return np.exp(x)


@dataclass(frozen=True)
class HyperVector:
    """Vector of log-variances ``eta`` (one per FIR tap).

    Construction does not enforce the constraints, so relaxed vectors can be
    used when testing the algebra; call :meth:`validate` where they matter.
    """

    eta: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float).reshape(-1)
        if eta.size == 0:
            raise ValueError("eta must have at least one entry")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def affine(cls, level: float, alpha: float, n: int) -> HyperVector:
        """``eta[k] = level - k * alpha`` for ``k = 0..n-1``."""
        return cls(level - alpha * np.arange(n, dtype=float))

    @property
    def n(self) -> int:
        return self.eta.size

    @property
    def level(self) -> float:
        return float(self.eta[0])

    @property
    def alpha(self) -> float:
        """Decay rate ``eta[0] - eta[1]`` (0 for a single tap)."""
        return float(self.eta[0] - self.eta[1]) if self.n > 1 else 0.0

    def second_differences(self) -> np.ndarray:
        return np.diff(self.eta, 2)

    def violations(self, tol: float = C2_TOL) -> list[str]:
        problems = []
        if self.n > 1 and not self.eta[1] < self.eta[0]:
            problems.append(f"C1: eta[1]={self.eta[1]!r} is not below eta[0]={self.eta[0]!r}")
        if self.n > 2:
            worst = float(np.max(np.abs(self.second_differences())))
            if worst > tol:
                problems.append(f"C2: max |second difference| = {worst:.3e} > {tol:.1e}")
        return problems

    def satisfies_constraints(self, tol: float = C2_TOL) -> bool:
        return not self.violations(tol)

    def validate(self, tol: float = C2_TOL) -> None:
        problems = self.violations(tol)
        if problems:
            raise ConstraintError("; ".join(problems))

    def variances(self) -> np.ndarray:
        """Diagonal of ``W``."""
        return safe_exp(self.eta)

    def inverse_variances(self) -> np.ndarray:
        """Diagonal of ``W^-1``."""
        return safe_exp(-self.eta)


@dataclass(frozen=True)
class PriorSpec:
    eta: HyperVector

    @classmethod
    def from_eta(cls, eta) -> PriorSpec:
        return cls(eta if isinstance(eta, HyperVector) else HyperVector(eta))

    @property
    def n(self) -> int:
        return self.eta.n

    @property
    def U(self) -> np.ndarray:
        return build_U(self.n)

    @property
    def W(self) -> np.ndarray:
        return np.diag(self.eta.variances())


@dataclass(frozen=True)
class DiKernelView:
    """Diagonal kernel ``K[i, i] = beta * lam**i`` (1-based ``i``) equal to ``W``."""

    beta: float
    lam: float

    def diagonal(self, n: int) -> np.ndarray:
        return self.beta * self.lam ** np.arange(n, dtype=float)


def build_U(n: int) -> np.ndarray:
    """Upper-triangular matrix of ones."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.triu(np.ones((n, n)))


def apply_U(x) -> np.ndarray:
    """``U @ x`` as a suffix sum."""
    return np.cumsum(np.asarray(x, dtype=float)[::-1])[::-1]


def apply_Ut(x) -> np.ndarray:
    """``U.T @ x`` as a prefix sum."""
    return np.cumsum(np.asarray(x, dtype=float))


def apply_U_inv(x) -> np.ndarray:
    """``inv(U) @ x``: ``x[k] - x[k+1]`` with ``x[n] = 0``."""
    x = np.asarray(x, dtype=float)
    return x - np.append(x[1:], 0.0)


def apply_Ut_inv(x) -> np.ndarray:
    """``inv(U.T) @ x``: ``x[k] - x[k-1]`` with ``x[-1] = 0``."""
    x = np.asarray(x, dtype=float)
    return x - np.concatenate(([0.0], x[:-1]))


def build_pi(spec: PriorSpec) -> np.ndarray:
    """Dense ``U W U^T``.

    Entry ``(i, j)`` is the sum of ``exp(eta[k])`` for ``k >= max(i, j)``, so
    the matrix is filled from suffix sums instead of a triple product.
    """
    tails = apply_U(spec.eta.variances())
    idx = np.arange(spec.n)
    return tails[np.maximum.outer(idx, idx)]


def build_pi_inv(spec: PriorSpec) -> np.ndarray:
    """Dense ``U^-T W^-1 U^-1`` (tridiagonal)."""
    n = spec.n
    winv = spec.eta.inverse_variances()
    Uinv = np.eye(n) - np.eye(n, k=1)
    return (Uinv.T * winv) @ Uinv


def stability_partial_sums(spec: PriorSpec, m: int) -> float:
    """``sum_{k=1..m} sqrt(Pi[k, k])``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if m > spec.n:
        raise ValueError(f"m={m} exceeds model order {spec.n}")
    diag = apply_U(spec.eta.variances())
    return float(np.sum(np.sqrt(diag[:m])))


def stability_bound(spec: PriorSpec) -> float:
    """Closed-form limit that the partial sums of ``sqrt(Pi[k, k])`` stay below.

    ``Pi[k, k] <= W[0, 0] * lam**(k-1) / (1 - lam)``, hence the sum of square
    roots is dominated by ``sqrt(W[0, 0] / (1 - lam)) / (1 - sqrt(lam))``.
    """
    view = to_di_view(spec)
    lam = view.lam
    if not lam < 1.0:
        raise ConstraintError(f"bound requires decaying variances (C1), got lambda={lam}")
    return float(np.sqrt(view.beta) / np.sqrt(1.0 - lam) / (1.0 - np.sqrt(lam)))


def to_di_view(spec: PriorSpec, tol: float = C2_TOL) -> DiKernelView:
    """Express ``W`` as ``beta * lam**i``; requires C2 (and ``n >= 2`` for ``lam``)."""
    hv = spec.eta
    if hv.n > 2:
        worst = float(np.max(np.abs(hv.second_differences())))
        if worst > tol:
            raise ConstraintError(f"C2 violated: max |second difference| = {worst:.3e}")
    beta = float(safe_exp(hv.level))
    lam = float(np.exp(-hv.alpha)) if hv.n > 1 else 0.0
    return DiKernelView(beta=beta, lam=lam)
