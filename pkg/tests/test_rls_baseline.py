import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import rel_err
from regrls.errors import NumericError
from regrls.lti_sim import regressor_matrix
from regrls.ml_oracle import BatchProblem, batch_solve
from regrls.rls_baseline import rls_init, rls_step, run_rls


def test_init():
    s = rls_init(2, 10.0)
    np.testing.assert_array_equal(s.F, [[10, 0], [0, 10]])
    np.testing.assert_array_equal(s.theta_hat, [0, 0])
    assert s.t == 0
    with pytest.raises(ValueError):
        rls_init(2, 0.0)


@pytest.mark.parametrize("f0", [0.1, 1.0, 10.0, 100.0])
def test_baseline_gains(f0):
    np.testing.assert_array_equal(rls_init(50, f0).F, f0 * np.eye(50))


def test_zero_regressor_leaves_state():
    s = rls_init(3, 1.0)
    s2, eps = rls_step(s, np.zeros(3), 2.5)
    assert eps == 2.5
    np.testing.assert_array_equal(s2.theta_hat, s.theta_hat)
    np.testing.assert_array_equal(s2.F, s.F)


def test_scalar_hand_values():
    s, eps = rls_step(rls_init(1, 1.0), [1.0], 1.0)
    assert eps == 1.0
    assert s.theta_hat[0] == pytest.approx(0.5)
    assert s.F[0, 0] == pytest.approx(0.5)


def test_non_finite_rejected():
    s = rls_init(2, 1.0)
    with pytest.raises(NumericError):
        rls_step(s, [np.nan, 1.0], 0.0)
    with pytest.raises(NumericError):
        rls_step(s, [1.0, 1.0], np.inf)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 20), st.integers(1, 200), st.sampled_from([0.1, 1.0, 10.0, 100.0]), st.integers(0, 2**31 - 1))
def test_batch_equivalence(n, t, f0, seed):
    rng = np.random.default_rng(seed)
    Phi = regressor_matrix(rng.standard_normal(t), n)
    Y = rng.standard_normal(t)
    state = run_rls(rls_init(n, f0), Phi, Y)
    # F(0)^-1 = sigma2 Pi0^-1 with sigma2 = 1
    theta, F = batch_solve(BatchProblem(Phi, Y, 1.0, f0 * np.eye(n)))
    if np.any(theta):
        assert rel_err(state.theta_hat, theta) < 1e-8
    assert rel_err(state.F, F) < 1e-8


def test_information_propagation_and_monotone_gain():
    rng = np.random.default_rng(5)
    n = 6
    state = rls_init(n, 10.0)
    probes = rng.standard_normal((20, n))
    for _ in range(40):
        phi = rng.standard_normal(n)
        new, _ = rls_step(state, phi, rng.standard_normal())
        np.testing.assert_array_equal(new.F, new.F.T)
        np.linalg.cholesky(new.F)
        diff = np.linalg.inv(new.F) - np.linalg.inv(state.F)
        assert rel_err(diff, np.outer(phi, phi)) < 1e-8
        q_old = np.einsum("ij,jk,ik->i", probes, state.F, probes)
        q_new = np.einsum("ij,jk,ik->i", probes, new.F, probes)
        assert np.all(q_new <= q_old + 1e-12)
        state = new
