"""Verifier for leader/contributor shared-register systems."""

from .core import (
    Action,
    CDSystem,
    Configuration,
    FiniteTS,
    LimitExceeded,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    TOP,
    cact,
    cr,
    cw,
    lact,
    lr,
    lw,
    step,
    validate,
)

__all__ = [
    "Action",
    "CDSystem",
    "Configuration",
    "FiniteTS",
    "LimitExceeded",
    "PdsRule",
    "PushdownSystem",
    "RegisterDomain",
    "TOP",
    "cact",
    "cr",
    "cw",
    "lact",
    "lr",
    "lw",
    "step",
    "validate",
]
