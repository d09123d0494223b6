"""Networked restless bandits for adaptive curricula, with the EduQate learner and baselines."""

__version__ = "0.1.0"

from .environment import EdNetEnv, EnvConfig, StepOutcome, expand_action, step  # noqa: E402
from .model import (  # noqa: E402
    GroupNetwork,
    StudentModel,
    TransitionTensor,
    ValidationReport,
    Violation,
    neighborhood,
    validate,
)
from .validation import DomainError  # noqa: E402

__all__ = [
    "DomainError", "EdNetEnv", "EnvConfig", "GroupNetwork", "StepOutcome", "StudentModel",
    "TransitionTensor", "ValidationReport", "Violation", "expand_action", "neighborhood",
    "step", "validate",
]
