"""Small-scale oracle checks runnable from the command line.

Each check builds a handful of random problems, runs the recursive code
and compares it against the batch formulas in :mod:`regrls.ml_oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hyper_update, ml_oracle, prior, reg_recursive, rls_baseline
from .lti_sim import regressor_matrix
from .hyper_update import ProjectionContext


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b) / scale)


def random_instance(rng: np.random.Generator, n: int, t: int, noise: float = 0.1):
    """FIR data with a decaying true response and an affine ``eta``."""
    Phi = regressor_matrix(rng.standard_normal(t), n)
    g = rng.standard_normal(n) * 0.8 ** np.arange(n)
    Y = Phi @ g + noise * rng.standard_normal(t)
    eta = prior.HyperVector.affine(rng.uniform(-2.0, 1.0), rng.uniform(0.05, 0.6), n)
    return Phi, Y, noise**2, eta


def check_batch_equivalence(seed: int = 0, cases: int = 5, tol: float = 1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, t = int(rng.integers(2, 11)), int(rng.integers(5, 61))
        Phi, Y, sigma2, eta = random_instance(rng, n, t)
        state = reg_recursive.reg_init(n, eta, sigma2)
        state = reg_recursive.run(state, Phi, Y, ProjectionContext(n, gamma=0.0))
        theta_batch, _ = ml_oracle.batch_solve(ml_oracle.BatchProblem.from_eta(Phi, Y, sigma2, eta))
        worst = max(worst, rel_err(state.theta_hat, theta_batch))

        f0 = float(rng.choice([0.1, 1.0, 10.0]))
        rls = rls_baseline.run_rls(rls_baseline.rls_init(n, f0), Phi, Y)
        theta_rls, _ = ml_oracle.batch_solve(ml_oracle.BatchProblem(Phi, Y, 1.0, f0 * np.eye(n)))
        worst = max(worst, rel_err(rls.theta_hat, theta_rls))
    return CheckResult("batch equivalence (gamma=0 and RLS)", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def check_gradient(seed: int = 1, cases: int = 5, tol: float = 1e-5, psi_perturbation: float = 0.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, t = int(rng.choice([4, 6, 8])), int(rng.choice([8, 15]))
        Phi, Y, sigma2, eta = random_instance(rng, n, t)
        theta_p, F_p = ml_oracle.batch_solve_primed(Phi, Y, sigma2, eta)
        psi = hyper_update.compute_psi(theta_p, np.diag(F_p), eta, sigma2) + psi_perturbation
        fd = ml_oracle.finite_difference_gradient(Phi, Y, sigma2, eta)
        worst = max(worst, rel_err(0.5 * psi, fd))
    return CheckResult("gradient vs finite differences", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def check_gradient_chain(seed: int = 2, cases: int = 5, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, t = int(rng.choice([4, 6, 8])), int(rng.choice([8, 15]))
        Phi, Y, sigma2, eta = random_instance(rng, n, t)
        p = ml_oracle.BatchProblem.from_eta(Phi, Y, sigma2, eta)
        general = ml_oracle.exact_gradient(p, ml_oracle.prior_pi_inv_derivatives(eta))
        theta_p, F_p = ml_oracle.batch_solve_primed(Phi, Y, sigma2, eta)
        primed = ml_oracle.primed_gradient(theta_p, F_p, eta, sigma2)
        half_psi = 0.5 * hyper_update.compute_psi(theta_p, np.diag(F_p), eta, sigma2)
        worst = max(worst, rel_err(-general, half_psi), rel_err(-primed, half_psi))
    return CheckResult("gradient chain (general trace = primed trace = closed form)", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def check_likelihood_paths(seed: int = 3, cases: int = 5, tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, t = int(rng.integers(1, 9)), int(rng.integers(1, 31))
        Phi, Y, sigma2, eta = random_instance(rng, n, t)
        p = ml_oracle.BatchProblem.from_eta(Phi, Y, sigma2, eta)
        worst = max(worst, rel_err(ml_oracle.neg_log_marginal(p), ml_oracle.neg_log_marginal(p, method="direct")))
    return CheckResult("marginal likelihood: determinant identity vs direct", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def check_projection(seed: int = 4, n: int = 20, samples: int = 100) -> CheckResult:
    ctx = ProjectionContext(n, gamma=1.0)
    P, C = ctx.P, ctx.C
    proj_err = max(float(np.max(np.abs(P @ P - P))), float(np.max(np.abs(C @ P))))
    rng = np.random.default_rng(seed)
    Phi, Y, sigma2, _ = random_instance(rng, n, samples)
    state = reg_recursive.reg_init(n, prior.HyperVector.affine(np.log(0.01), -np.log(0.9), n), sigma2)
    worst_c2, c1_ok = 0.0, True
    for phi, y in zip(Phi, Y):
        state, _ = reg_recursive.step(state, phi, y, ctx)
        worst_c2 = max(worst_c2, float(np.max(np.abs(state.eta.second_differences()))))
        c1_ok &= bool(state.eta.eta[1] < state.eta.eta[0])
    passed = proj_err <= 1e-10 and worst_c2 < 1e-12 and c1_ok
    return CheckResult(
        "projection invariants",
        passed,
        f"max |P^2-P|,|CP| = {proj_err:.1e}; max |second diff eta| = {worst_c2:.1e}; C1 held: {c1_ok}",
    )


def verify_mode(psi_perturbation: float = 0.0) -> list[CheckResult]:
    """Run every check; ``psi_perturbation`` injects a fault into the gradient."""
    return [
        check_batch_equivalence(),
        check_gradient(psi_perturbation=psi_perturbation),
        check_gradient_chain(),
        check_likelihood_paths(),
        check_projection(),
    ]
