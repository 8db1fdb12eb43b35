"""Recursive FIR identification with a regularization prior whose
hyperparameters are estimated online by projected gradient descent on the
marginal likelihood."""

from .errors import ConstraintError, NumericError, SingularityError, StepRejectedError, UndefinedFitError
from .hyper_update import GradientReport, ProjectionContext, compute_psi, eta_step, project_psi
from .lti_sim import DataRecord, TransferFunction, impulse_response, make_regressor, nominal_system, simulate
from .metrics import MetricsSeries, fit_percent, impulse_mse, snr_db
from .ml_oracle import BatchProblem, batch_solve, exact_gradient, neg_log_marginal
from .prior import DiKernelView, HyperVector, PriorSpec, build_pi, build_U, stability_partial_sums, to_di_view
from .reg_recursive import RegEstimatorState, hyper_relinearize, measurement_update, reg_init, step
from .rls_baseline import RlsState, rls_init, rls_step

__version__ = "0.1.0"
