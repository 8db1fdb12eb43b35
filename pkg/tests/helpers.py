import numpy as np

from regrls.lti_sim import regressor_matrix
from regrls.prior import HyperVector


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def fir_instance(rng, n, t, noise=0.1, level=(-2.0, 1.0), alpha=(0.05, 0.6)):
    """Random FIR record with a decaying true response and an affine eta."""
    Phi = regressor_matrix(rng.standard_normal(t), n)
    g = rng.standard_normal(n) * 0.8 ** np.arange(n)
    Y = Phi @ g + noise * rng.standard_normal(t)
    eta = HyperVector.affine(rng.uniform(*level), rng.uniform(*alpha), n)
    return Phi, Y, noise**2, eta
