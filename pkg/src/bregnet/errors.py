"""Exception hierarchy shared across the package.

Everything user-facing derives from :class:`BregnetError` so that the CLI
can map library failures to exit codes without string matching.
"""


class BregnetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(BregnetError, ValueError):
    """An argument violates a documented precondition (domain, shape, range)."""


class SizingError(BregnetError, ValueError):
    """A network sizing request cannot be satisfied (weight budget too small)."""


class CapabilityError(BregnetError):
    """A required capability is missing, e.g. an exact-derivative oracle
    that does not reach the requested order."""


class TrainingAbortError(BregnetError, RuntimeError):
    """Training hit a non-finite gradient; the message names the epoch."""


class ConfigError(BregnetError, ValueError):
    """A CLI/config-file value is malformed or inconsistent (exit code 2)."""
