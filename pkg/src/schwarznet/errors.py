"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError and FormatError exit 2,
DivergenceError exits 3, everything else is a bug.
"""


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


class GeometryError(ValueError):
    """Degenerate or inconsistent domain geometry."""


class FormatError(ValueError):
    """A report file does not match the expected schema."""


class ProtocolError(RuntimeError):
    """Internal exchange-protocol violation (stale trace, bad reset scope)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, subdomain=None, epoch=None, outer_iteration=None, group=None):
        super().__init__(message)
        self.subdomain = subdomain
        self.epoch = epoch
        self.outer_iteration = outer_iteration
        self.group = group
