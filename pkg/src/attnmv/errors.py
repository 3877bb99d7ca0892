"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain a function is defined on."""


class ConfigError(ValueError):
    """A configuration file or grid specification violates an invariant."""


class SchemeError(RuntimeError):
    """The finite-difference transition law failed to be a probability law.

    Carries enough context to identify the offending node/control and, when
    the failure is curable by shrinking the time step, the largest factor
    ``s < 1`` such that ``h2 * s`` would restore validity.  ``shrink`` is
    ``None`` when no time-step reduction can help (all entries scale
    linearly in ``h2``, so a negative diffusion coefficient stays negative).
    """

    def __init__(self, message, *, node=None, control=None, entry=None,
                 value=None, shrink=None):
        super().__init__(message)
        self.node = node
        self.control = control
        self.entry = entry
        self.value = value
        self.shrink = shrink


# CLI exit codes.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEME = 3
EXIT_PROPERTY = 4
