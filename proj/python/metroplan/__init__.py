"""Metro network expansion planning on synthetic or loaded cities."""

from ._metroplan import (
    City,
    Config,
    ConfigError,
    Environment,
    Error,
    Graph,
    GuardRefusal,
    InvalidAction,
    InvalidArgument,
    InvalidState,
    IoError,
    NumericError,
    ParseError,
    Plan,
    ValidationError,
    audit,
    baseline,
    gradient_check,
    inequity,
    oracle,
    rollout,
    satisfied_od,
    train,
)

__all__ = [
    "City",
    "Config",
    "ConfigError",
    "Environment",
    "Error",
    "Graph",
    "GuardRefusal",
    "InvalidAction",
    "InvalidArgument",
    "InvalidState",
    "IoError",
    "NumericError",
    "ParseError",
    "Plan",
    "ValidationError",
    "audit",
    "baseline",
    "gradient_check",
    "inequity",
    "oracle",
    "rollout",
    "satisfied_od",
    "train",
]
