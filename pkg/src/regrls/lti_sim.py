"""Discrete-time LTI data generation.

Transfer functions are stored as polynomials in the backward shift
``q^-1``. The numerator list starts at ``q^-1`` (the systems simulated here
are strictly proper, matching an FIR model whose first tap multiplies
``u(t-1)``); the denominator list starts at ``q^0`` and is monic.

Noise and input draws use :func:`numpy.random.default_rng` (PCG64 bit
generator, ziggurat Gaussian sampler).  Seeds therefore reproduce bit-exactly
for a fixed numpy major version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class TransferFunction:
    """Rational model ``B(q^-1) / A(q^-1)``.

    Attributes:
        numerator: coefficients of ``q^-1, q^-2, ...``.
        denominator: coefficients of ``q^0, q^-1, ...`` with a leading 1.
    """

    numerator: tuple[float, ...]
    denominator: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        num = tuple(float(c) for c in self.numerator)
        den = tuple(float(c) for c in self.denominator)
        if not num:
            raise ValueError("numerator must not be empty")
        if not den or den[0] != 1.0:
            raise ValueError("denominator must be monic (leading coefficient 1)")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    def filter_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(b, a)`` in the ``scipy.signal.lfilter`` convention."""
        b = np.concatenate(([0.0], self.numerator))
        return b, np.asarray(self.denominator)

    def poles(self) -> np.ndarray:
        return np.roots(self.denominator) if len(self.denominator) > 1 else np.array([])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def __mul__(self, other: TransferFunction) -> TransferFunction:
        # (q^-1 b1)(q^-1 b2) = q^-1 * (q^-1 b1 b2): one extra leading zero
        num = np.concatenate(([0.0], np.convolve(self.numerator, other.numerator)))
        den = np.convolve(self.denominator, other.denominator)
        return TransferFunction(tuple(num), tuple(den))


def nominal_system() -> TransferFunction:
    """Sixth-order damped benchmark system used by the comparison study."""
    low_pass = TransferFunction((0.02008, 0.04017, 0.02008), (1.0, -1.561, 0.6414))
    resonant = TransferFunction(
        (-0.7334, 1.516, -0.7591, 0.6941),
        (1.0, -1.282, 1.298, -0.4757, 0.1775),
    )
    return low_pass * resonant


@dataclass(frozen=True)
class DataRecord:
    """Input/output record of one identification experiment."""

    u: np.ndarray
    y: np.ndarray
    e_std: float
    seed: int | None = None
    y_clean: np.ndarray | None = None

    def __post_init__(self):
        if len(self.u) != len(self.y):
            raise ValueError(f"len(u)={len(self.u)} != len(y)={len(self.y)}")

    def __len__(self) -> int:
        return len(self.u)


def impulse_response(tf: TransferFunction, horizon: int) -> np.ndarray:
    """Taps ``g_1 .. g_horizon`` of the response to a unit impulse at t=0."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    impulse = np.zeros(horizon + 1)
    impulse[0] = 1.0
    b, a = tf.filter_coefficients()
    return lfilter(b, a, impulse)[1:]


def simulate(
    tf: TransferFunction, u, noise_std: float, seed: int | None = None
) -> DataRecord:
    """Filter ``u`` through ``tf`` and add white Gaussian noise.

    The noise sequence is drawn from ``default_rng(seed)``; ``seed`` may be
    anything ``default_rng`` accepts (an int or a list of ints).  With
    ``noise_std == 0`` no draw is made and ``y`` is the noiseless output.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("u must be a nonempty 1-D sequence")
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    b, a = tf.filter_coefficients()
    y_clean = lfilter(b, a, u)
    if noise_std > 0:
        e = noise_std * np.random.default_rng(seed).standard_normal(u.size)
    else:
        e = np.zeros(u.size)
    return DataRecord(u=u, y=y_clean + e, e_std=float(noise_std), seed=seed, y_clean=y_clean)


def make_regressor(u, t: int, n: int) -> np.ndarray:
    """Return ``[u(t-1), ..., u(t-n)]`` with zeros before the record starts."""
    if n < 1:
        raise ValueError(f"model order must be >= 1, got {n}")
    u = np.asarray(u, dtype=float)
    phi = np.zeros(n)
    for k in range(1, n + 1):
        idx = t - k
        if 0 <= idx < u.size:
            phi[k - 1] = u[idx]
    return phi


def regressor_matrix(u, n: int) -> np.ndarray:
    """Stack ``make_regressor(u, t, n)`` for every ``t`` in the record."""
    u = np.asarray(u, dtype=float)
    Phi = np.zeros((u.size, n))
    for k in range(1, min(n, u.size - 1) + 1):
        Phi[k:, k - 1] = u[: u.size - k]
    return Phi


def gaussian_input(samples: int, std: float, seed: int | None) -> np.ndarray:
    """Zero-mean white Gaussian excitation."""
    return std * np.random.default_rng(seed).standard_normal(samples)
