import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fir_instance, rel_err
from regrls import reg_recursive
from regrls.errors import ConstraintError, NumericError, StepRejectedError
from regrls.hyper_update import ProjectionContext, compute_psi, project_psi
from regrls.lti_sim import gaussian_input, nominal_system, regressor_matrix, simulate
from regrls.ml_oracle import BatchProblem, batch_solve, batch_solve_primed
from regrls.prior import HyperVector, PriorSpec, build_pi, build_U
from regrls.reg_recursive import hyper_relinearize, measurement_update, reg_init, run, step
from regrls.rls_baseline import RlsState, rls_step


def test_init_scalar():
    s = reg_init(1, HyperVector([0.0]), 1.0)
    np.testing.assert_array_equal(s.F_prime, [[1.0]])
    np.testing.assert_array_equal(s.theta_prime, [0.0])


def test_init_from_default_prior():
    eta0 = HyperVector(np.log(0.001) + np.log(0.9) * np.arange(50))
    s = reg_init(50, eta0, 0.05**2)
    expected = 0.001 * 0.9 ** np.arange(50) / 0.0025
    np.testing.assert_allclose(np.diag(s.F_prime), expected, rtol=1e-12)
    np.testing.assert_array_equal(s.F_prime, np.diag(np.diag(s.F_prime)))
    # sigma2 W^-1 is the initial information matrix
    np.testing.assert_allclose(np.linalg.inv(s.F_prime), 0.0025 * np.diag(np.exp(-eta0.eta)), rtol=1e-12)


def test_init_validation():
    with pytest.raises(ConstraintError):
        reg_init(3, HyperVector([0.0, 0.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        reg_init(2, HyperVector([0.0, -1.0]), 0.0)
    with pytest.raises(ValueError):
        reg_init(3, HyperVector([0.0, -1.0]), 1.0)


def test_zero_regressor_measurement_update():
    s = reg_init(4, HyperVector.affine(0.0, 0.5, 4), 0.3)
    s2, eps = measurement_update(s, np.zeros(4), 1.7)
    assert eps == 1.7
    np.testing.assert_array_equal(s2.theta_prime, s.theta_prime)
    np.testing.assert_array_equal(s2.F_prime, s.F_prime)


def test_non_finite_rejected():
    s = reg_init(2, HyperVector([0.0, -1.0]), 1.0)
    with pytest.raises(NumericError):
        step(s, [np.nan, 0.0], 1.0, ProjectionContext(2))


def test_prediction_error_is_basis_invariant():
    rng = np.random.default_rng(0)
    Phi, Y, s2, eta = fir_instance(rng, 8, 40)
    s = reg_init(8, eta, s2)
    ctx = ProjectionContext(8, gamma=0.5)
    for phi, y in zip(Phi, Y):
        expected = y - phi @ s.theta_hat
        s, diag = step(s, phi, y, ctx)
        assert abs(diag.epsilon_o - expected) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 20), st.integers(1, 200), st.integers(0, 2**31 - 1))
def test_frozen_hyperparameters_match_batch(n, t, seed):
    rng = np.random.default_rng(seed)
    Phi, Y, s2, eta = fir_instance(rng, n, t)
    s = run(reg_init(n, eta, s2), Phi, Y, ProjectionContext(n, gamma=0.0))
    theta, _ = batch_solve(BatchProblem.from_eta(Phi, Y, s2, eta))
    if np.any(theta):
        assert rel_err(s.theta_hat, theta) < 1e-8
    else:
        np.testing.assert_array_equal(s.theta_hat, 0.0)
    assert s.eta is eta


def test_primed_gain_matches_original_basis_propagation():
    rng = np.random.default_rng(1)
    n = 10
    Phi, Y, s2, eta = fir_instance(rng, n, 80)
    reg = reg_init(n, eta, s2)
    plain = RlsState(theta_hat=np.zeros(n), F=build_pi(PriorSpec(eta)) / s2)
    ctx = ProjectionContext(n, gamma=0.0)
    for phi, y in zip(Phi, Y):
        reg, _ = step(reg, phi, y, ctx)
        plain, _ = rls_step(plain, phi, y)
        assert rel_err(reg.F, plain.F) < 1e-8
        if np.any(plain.theta_hat):
            assert rel_err(reg.theta_hat, plain.theta_hat) < 1e-8


def _state_after(rng, n, t, eta):
    Phi, Y, s2, _ = fir_instance(rng, n, t)
    s = run(reg_init(n, eta, s2), Phi, Y, ProjectionContext(n, gamma=0.0))
    return s, Phi, Y, s2


def test_relinearize_identity():
    rng = np.random.default_rng(2)
    eta = HyperVector.affine(-1.0, 0.2, 5)
    s, *_ = _state_after(rng, 5, 20, eta)
    out = hyper_relinearize(s, HyperVector(eta.eta.copy()))
    np.testing.assert_array_equal(out.F_prime, s.F_prime)
    np.testing.assert_array_equal(out.theta_prime, s.theta_prime)


def test_scalar_first_order_error_is_quadratic():
    F, s2 = 0.8, 0.5
    state = reg_recursive.RegEstimatorState(np.array([0.3]), np.array([[F]]), HyperVector([0.0]), s2)
    ratios = []
    for d_eta in (1e-2, 1e-3, 1e-4):
        new = hyper_relinearize(state, HyperVector([-d_eta]))
        delta = np.exp(d_eta) - 1.0
        exact = 1.0 / (1.0 / F + s2 * delta)
        ratios.append(abs(new.F_prime[0, 0] - exact) / delta**2)
    # leading error term is (s2 delta)^2 F^3
    np.testing.assert_allclose(ratios, s2**2 * F**3, rtol=0.05)


def _relinearization_errors(order, steps):
    rng = np.random.default_rng(3)
    n = 5
    eta = HyperVector.affine(-1.0, 0.3, n)
    Phi, Y, s2, _ = fir_instance(rng, n, 30)
    base = run(reg_init(n, eta, s2, correction_order=order), Phi, Y, ProjectionContext(n, gamma=0.0))
    errs = []
    for h in steps:
        eta_new = HyperVector.affine(eta.level - h, eta.alpha + 0.5 * h, n)
        approx = hyper_relinearize(base, eta_new)
        theta_x, F_x = batch_solve_primed(Phi, Y, s2, eta_new)
        errs.append(np.linalg.norm(approx.F_prime - F_x) / np.linalg.norm(F_x))
        assert np.linalg.norm(approx.theta_prime - theta_x) / np.linalg.norm(theta_x) < 10 * h
    return np.array(errs)


@pytest.mark.parametrize("order, slope, steps", [(1, 2.0, [1e-2, 1e-3, 1e-4]), (2, 3.0, [3e-2, 1e-2, 3e-3])])
def test_neumann_order_against_batch_recomputation(order, slope, steps):
    errs = _relinearization_errors(order, steps)
    fitted = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert fitted == pytest.approx(slope, abs=0.2)


def test_higher_orders_are_more_accurate():
    steps = [2e-1, 1e-1, 5e-2]
    e1, e2, e3 = (_relinearization_errors(k, steps) for k in (1, 2, 3))
    assert np.all(e3 < e2) and np.all(e2 < e1)


def test_budgeted_update_applies_largest_changes_only():
    rng = np.random.default_rng(4)
    n = 8
    eta = HyperVector.affine(-1.0, 0.3, n)
    s, *_ = _state_after(rng, n, 25, eta)
    eta_new = HyperVector.affine(-1.05, 0.32, n)
    full = hyper_relinearize(s, eta_new)
    import dataclasses

    np.testing.assert_allclose(hyper_relinearize(dataclasses.replace(s, max_updates=n), eta_new).F_prime, full.F_prime, rtol=1e-14)
    m = 3
    part = hyper_relinearize(dataclasses.replace(s, max_updates=m), eta_new)
    delta = eta_new.inverse_variances() - eta.inverse_variances()
    keep = np.argsort(-np.abs(delta))[:m]
    D = np.zeros(n)
    D[keep] = delta[keep]
    expected = s.F_prime - s.sigma2 * s.F_prime @ np.diag(D) @ s.F_prime
    np.testing.assert_allclose(part.F_prime, 0.5 * (expected + expected.T), rtol=1e-12, atol=1e-15)


def test_relinearize_rejects_indefinite_gain():
    state = reg_recursive.RegEstimatorState(np.array([0.0]), np.array([[1.0]]), HyperVector([0.0]), 1.0)
    with pytest.raises(StepRejectedError):
        hyper_relinearize(state, HyperVector([-np.log(3.0)]))


def test_step_halves_gain_then_skips(monkeypatch):
    n = 4
    eta = HyperVector.affine(-1.0, 0.2, n)
    calls = []

    def always_reject(state, eta_new):
        calls.append(eta_new)
        raise StepRejectedError("forced")

    monkeypatch.setattr(reg_recursive, "hyper_relinearize", always_reject)
    s = reg_init(n, eta, 0.1)
    new, diag = step(s, np.ones(n), 1.0, ProjectionContext(n, gamma=1.0))
    assert len(calls) == reg_recursive.MAX_STEP_HALVINGS + 1
    assert diag.rejections == len(calls) and diag.gamma_used == 0.0
    assert new.eta is eta
    levels = [eta.level - e.level for e in calls]
    np.testing.assert_allclose(np.array(levels[:-1]) / np.array(levels[1:]), 2.0, rtol=1e-9)


def test_step_accepts_after_one_halving(monkeypatch):
    real = reg_recursive.hyper_relinearize
    count = {"n": 0}

    def reject_once(state, eta_new):
        count["n"] += 1
        if count["n"] == 1:
            raise StepRejectedError("forced")
        return real(state, eta_new)

    monkeypatch.setattr(reg_recursive, "hyper_relinearize", reject_once)
    s = reg_init(3, HyperVector.affine(-1.0, 0.2, 3), 0.1)
    _, diag = step(s, np.array([1.0, 0.5, 0.2]), 1.0, ProjectionContext(3, gamma=1.0))
    assert diag.rejections == 1 and diag.gamma_used == 0.5


def test_scalar_step_hand_trace():
    s2, gamma = 0.25, 0.1
    s = reg_init(1, HyperVector([0.0]), s2)
    phi, y = np.array([2.0]), 1.0
    new, diag = step(s, phi, y, ProjectionContext(1, gamma=gamma))
    # measurement update with phi' = phi, F = 1/s2 = 4
    F0 = 4.0
    eps = 1.0
    denom = 1 + 4 * F0
    th = F0 * 2 * eps / denom
    F1 = F0 - (F0 * 2) ** 2 / denom
    psi = 1 - (th**2 + s2 * F1) / 1.0
    eta1 = -gamma * psi
    delta = np.exp(-eta1) - 1.0
    assert diag.epsilon_o == eps
    assert diag.psi[0] == pytest.approx(psi, rel=1e-14)
    assert new.eta.eta[0] == pytest.approx(eta1, rel=1e-14)
    assert new.F_prime[0, 0] == pytest.approx(F1 - s2 * F1 * delta * F1, rel=1e-13)
    assert new.theta_prime[0] == pytest.approx((1 - s2 * F1 * delta) * th, rel=1e-13)


def test_gamma_zero_keeps_eta_and_reports_no_gradient():
    s = reg_init(3, HyperVector.affine(0.0, 0.5, 3), 0.1)
    new, diag = step(s, np.array([1.0, 2.0, 3.0]), 0.5, ProjectionContext(3, gamma=0.0))
    assert new.eta is s.eta and diag.report is None


def test_per_sample_path_has_no_explicit_inverse(monkeypatch):
    rng = np.random.default_rng(5)
    Phi, Y, s2, eta = fir_instance(rng, 12, 30)
    ctx = ProjectionContext(12, gamma=1.0)
    state = reg_init(12, eta, s2)
    for name in ("inv", "solve", "pinv"):
        monkeypatch.setattr(np.linalg, name, lambda *a, **k: pytest.fail("dense inverse on the per-sample path"))
    run(state, Phi, Y, ctx)


def test_default_protocol_run_stays_valid():
    n, N, sigma = 50, 250, 0.05
    rng_seed = 21
    u = gaussian_input(N, 0.5, rng_seed)
    rec = simulate(nominal_system(), u, sigma, seed=rng_seed + 1)
    Phi = regressor_matrix(rec.u, n)
    s = reg_init(n, HyperVector.affine(np.log(0.001), -np.log(0.9), n), sigma**2)
    ctx = ProjectionContext(n, gamma=1.0)
    for phi, y in zip(Phi, rec.y):
        s, diag = step(s, phi, y, ctx)
        s.eta.validate()
        np.linalg.cholesky(s.F_prime)
        assert diag.rejections == 0
    assert np.isfinite(s.theta_hat).all()
