"""Exception types shared across the package."""


class PartliftError(Exception):
    """Base class for all errors raised by partlift."""


class ConfigError(PartliftError, ValueError):
    """Invalid configuration or dimensions."""


class PartSetFormatError(PartliftError, ValueError):
    """A part-set directory is malformed, truncated or inconsistent."""


class PoseError(PartliftError, ValueError):
    """Camera pose is degenerate for the look-at construction."""


class UsageError(PartliftError, ValueError):
    """An operation was called with inconsistent arguments."""


class NumericError(PartliftError, ArithmeticError):
    """A function produced non-finite values."""


class VolumeAllocationError(PartliftError, MemoryError):
    """Materializing a volume would exceed the memory budget."""

    def __init__(self, required_bytes, budget_bytes):
        self.required_bytes = int(required_bytes)
        self.budget_bytes = int(budget_bytes)
        super().__init__(
            f"materializing volume needs {self.required_bytes} bytes "
            f"({self.required_bytes / 1e6:.1f} MB), budget is {self.budget_bytes} bytes"
        )


class DomainError(PartliftError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""
