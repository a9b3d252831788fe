"""Hyperbolic social recommendation."""

from ._hsr import (
    CompatibilityError,
    Config,
    Dataset,
    Error,
    InputError,
    Model,
    NumericError,
    TrainResult,
    UsageError,
    accuracy,
    auc,
    dist,
    exp0,
    log0,
    mobius_add,
    mobius_matvec,
    mobius_scalar,
    project,
    run_checks,
    train,
)

__all__ = [
    "CompatibilityError",
    "Config",
    "Dataset",
    "Error",
    "InputError",
    "Model",
    "NumericError",
    "TrainResult",
    "UsageError",
    "accuracy",
    "auc",
    "dist",
    "exp0",
    "log0",
    "mobius_add",
    "mobius_matvec",
    "mobius_scalar",
    "project",
    "run_checks",
    "train",
]
