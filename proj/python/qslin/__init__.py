"""Quasi-static feedback linearization of minimally underactuated Lagrangian systems.

Reports come back as plain dicts with the same fields as the CLI's JSON output.
"""

from ._qslin import (
    Error,
    Expr,
    MathConditionError,
    Model,
    NumericError,
    ValidationError,
    builtin_config_text,
    builtin_names,
    check_config,
    effective_config,
    jet_name,
    parse,
)

__all__ = [
    "Error",
    "Expr",
    "MathConditionError",
    "Model",
    "NumericError",
    "ValidationError",
    "builtin_config_text",
    "builtin_names",
    "check_config",
    "effective_config",
    "jet_name",
    "parse",
]
