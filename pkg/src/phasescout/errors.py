"""Exception types shared across the package."""


class PhasescoutError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PhasescoutError, ValueError):
    """An argument is outside the valid domain of an operation."""


class DegenerateTensorError(PhasescoutError, ValueError):
    """A tensor is identically zero where a decomposition needs rank >= 1."""


class DegenerateStateError(PhasescoutError, ValueError):
    """A state has zero norm and cannot be normalized."""


class ConvergenceError(PhasescoutError, RuntimeError):
    """An iterative solver failed in a way that cannot be flagged and returned."""


class RecordError(PhasescoutError, ValueError):
    """A persisted ground-state record is missing, incomplete, or corrupt."""


class IncompleteCacheError(PhasescoutError, RuntimeError):
    """A ground-state cache lacks cells that the requested operation needs."""

    def __init__(self, missing: list[tuple[int, int]]):
        self.missing = list(missing)
        cells = ", ".join(f"({iu},{iv})" for iu, iv in self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" and {len(self.missing) - 20} more"
        super().__init__(f"cache is missing {len(self.missing)} cells: {cells}{more}")


class ConfigError(PhasescoutError, ValueError):
    """A run configuration file is malformed or contains unknown keys."""
