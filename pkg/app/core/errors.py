from __future__ import annotations


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Invalid, unknown or corrupted configuration."""

    exit_code = EXIT_CONFIG


class NumericalError(RuntimeError):
    """Numerical failure: singular matrices, divergence, failed solves."""

    exit_code = EXIT_NUMERICAL


def exit_code_for(exc: BaseException) -> int:
    return int(getattr(exc, "exit_code", EXIT_NUMERICAL))
