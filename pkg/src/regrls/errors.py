"""Exception types raised by the estimators and oracles."""

import numpy as np


class ConstraintError(ValueError):
    """Hyperparameters violate the ordering (C1) or linearity (C2) constraints."""


class NumericError(FloatingPointError):
    """Non-finite input reached an estimator; the state was left untouched."""


class StepRejectedError(ArithmeticError):
    """A hyperparameter re-linearization destroyed positive definiteness of the gain."""


class SingularityError(np.linalg.LinAlgError):
    """A matrix that must be positive definite could not be factorized."""


class UndefinedFitError(ValueError):
    """The fit score is undefined because the measured output is constant."""
