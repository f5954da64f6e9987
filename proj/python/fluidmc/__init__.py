"""Fluid model checking of population models."""

from ._core import (
    Error,
    InputError,
    Model,
    NumericError,
    ParseError,
    UnknownIdentifier,
    __version__,
    boolean_signal,
    check,
    cumulative_reward,
    fluid,
    instantaneous_reward,
    load_model,
    parse_model,
    probability_curve,
    run_cli,
    simulate,
    steady_state,
    steady_state_reward,
    transient,
    uniformization,
    validate,
)

__all__ = [
    "Error",
    "InputError",
    "Model",
    "NumericError",
    "ParseError",
    "UnknownIdentifier",
    "__version__",
    "boolean_signal",
    "check",
    "cumulative_reward",
    "fluid",
    "instantaneous_reward",
    "load_model",
    "parse_model",
    "probability_curve",
    "run_cli",
    "simulate",
    "steady_state",
    "steady_state_reward",
    "transient",
    "uniformization",
    "validate",
]
