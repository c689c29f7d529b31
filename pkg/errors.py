"""Exception hierarchy shared by the library and the command layer."""

from typing import Optional


class ReconstructionError(Exception):
    """Base class. `category` is the machine-readable tag printed by the CLI."""

    category: str = "internal"
    exit_code: int = 1


class DimensionError(ReconstructionError, ValueError):
    """Tensor extents do not line up for an operation."""

    category = "dimension"


class InvalidInputError(ReconstructionError, ValueError):
    """A value violates a documented precondition (range, binary, Nyquist...)."""

    category = "validation"


class UsageError(ReconstructionError, RuntimeError):
    """An API was called in an unsupported state (e.g. backward on a graphless tensor)."""

    category = "usage"


class UnsupportedVariantError(ReconstructionError, RuntimeError):
    """Operation needs a modality that the network variant does not have."""

    category = "unsupported_variant"


class ConfigurationError(ReconstructionError, ValueError):
    """Network or scene configuration is inconsistent."""

    category = "config"
    exit_code = 2


class ConfigParseError(ReconstructionError, ValueError):
    """Run config file could not be parsed; carries the offending line."""

    category = "config"
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")


class MissingPrerequisiteError(ReconstructionError, FileNotFoundError):
    """A command needs an artifact that an earlier stage has not produced."""

    category = "missing_prerequisite"
    exit_code = 3


class NumericDivergenceError(ReconstructionError, ArithmeticError):
    """Loss became NaN/Inf during training."""

    category = "numeric"
    exit_code = 4


class FormatError(ReconstructionError, ValueError):
    """Binary container has a bad magic, truncated payload or bad field."""

    category = "io"
    exit_code = 5


class InterruptedRunError(ReconstructionError, RuntimeError):
    """Run stopped by a signal before producing its artifacts."""

    category = "interrupted"
