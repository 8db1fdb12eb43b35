"""Scores for identified FIR models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedFitError


def impulse_mse(theta_hat, g_true, horizon: int | None = None) -> float:
    """Mean squared difference over the first ``horizon`` taps."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    g_true = np.asarray(g_true, dtype=float)
    limit = min(theta_hat.size, g_true.size)
    horizon = limit if horizon is None else horizon
    if not 1 <= horizon <= limit:
        raise ValueError(f"horizon must be in [1, {limit}], got {horizon}")
    diff = theta_hat[:horizon] - g_true[:horizon]
    return float(np.mean(diff * diff))


def fit_percent(y, y_hat) -> float:
    """Normalized fit ``100 * (1 - ||y - y_hat|| / ||y - mean(y)||)``."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise ValueError("fit needs at least two samples")
    spread = np.linalg.norm(y - y.mean())
    if spread == 0:
        raise UndefinedFitError("fit is undefined for a constant output")
    return float(100.0 * (1.0 - np.linalg.norm(y - y_hat) / spread))


def snr_db(y_clean, e_std: float) -> float:
    """``20 log10(std(y_clean) / e_std)``."""
    y_clean = np.asarray(y_clean, dtype=float)
    if y_clean.size == 0:
        raise ValueError("y_clean must be nonempty")
    if not e_std > 0:
        raise ValueError(f"e_std must be positive, got {e_std}")
    return float(20.0 * np.log10(np.std(y_clean) / e_std))


@dataclass
class MetricsSeries:
    """Per-sample scores of one estimator on one record (or an average of runs)."""

    t: list[int] = field(default_factory=list)
    mse_impulse: list[float] = field(default_factory=list)
    fit_percent: list[float] = field(default_factory=list)
    epsilon_o: list[float] = field(default_factory=list)
    eta: list[np.ndarray] | None = None

    def append(self, t: int, mse: float, fit: float, eps: float, eta=None) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError(f"time index {t} does not follow {self.t[-1]}")
        if mse < 0:
            raise ValueError("mse must be nonnegative")
        self.t.append(int(t))
        self.mse_impulse.append(float(mse))
        self.fit_percent.append(float(fit))
        self.epsilon_o.append(float(eps))
        if eta is not None:
            if self.eta is None:
                self.eta = []
            self.eta.append(np.array(eta, dtype=float))

    def __len__(self) -> int:
        return len(self.t)

    def as_arrays(self) -> dict[str, np.ndarray]:
        out = {
            "t": np.asarray(self.t, dtype=int),
            "mse_impulse": np.asarray(self.mse_impulse, dtype=float),
            "fit_percent": np.asarray(self.fit_percent, dtype=float),
            "epsilon_o": np.asarray(self.epsilon_o, dtype=float),
        }
        if self.eta is not None:
            out["eta"] = np.vstack(self.eta) if self.eta else np.zeros((0, 0))
        return out

    @classmethod
    def mean_of(cls, series: list[MetricsSeries]) -> MetricsSeries:
        """Pointwise arithmetic mean of runs sharing the same time axis."""
        if not series:
            raise ValueError("need at least one series")
        t = series[0].t
        if any(s.t != t for s in series):
            raise ValueError("series have different time axes")
        out = cls(t=list(t))
        for name in ("mse_impulse", "fit_percent", "epsilon_o"):
            stacked = np.array([getattr(s, name) for s in series], dtype=float)
            setattr(out, name, list(np.mean(stacked, axis=0)) if len(t) else [])
        if all(s.eta is not None for s in series):
            stacked = np.array([np.vstack(s.eta) for s in series]) if len(t) else None
            out.eta = list(np.mean(stacked, axis=0)) if stacked is not None else []
        return out
