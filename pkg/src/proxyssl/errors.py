"""Exception types shared across the package, mapped to CLI exit codes."""


class ProxySslError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class DataError(ProxySslError):
    """Malformed or invariant-violating dataset content."""

    exit_code = 1


class ConfigError(ProxySslError):
    """Invalid configuration value or experiment spec."""

    exit_code = 2


class ShapeError(ProxySslError):
    """Dimension mismatch between array operands."""

    exit_code = 3


class NumericError(ProxySslError):
    """Non-finite value produced where finite values are required."""

    exit_code = 3


class ProtocolError(ProxySslError):
    """Experiment bookkeeping violation, e.g. unmatched run pairing."""

    exit_code = 3
