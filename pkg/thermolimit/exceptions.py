"""Custom exception hierarchy for thermolimit.

Every failure raised by the library carries an ErrorCategory, which the
experiment harness maps onto a process exit code. Subsystem subclasses
only differ in their default ``module`` tag and a few typed attributes.

Key classes:
    ErrorCategory: Failure classification (schema, precondition, io, numerical).
    ThermolimitError: Base class with structured context.
"""

from enum import Enum
from typing import Any, List, Optional


class ErrorCategory(str, Enum):
    """Classification of errors, mapped onto CLI exit codes."""

    SCHEMA = "schema"              # Malformed or out-of-range experiment spec
    PRECONDITION = "precondition"  # Valid spec, but an operation's precondition fails
    IO = "io"                      # Unreadable spec, unwritable output
    NUMERICAL = "numerical"        # Numerical breakdown during a run

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self]


_EXIT_CODES = {
    ErrorCategory.SCHEMA: 2,
    ErrorCategory.PRECONDITION: 3,
    ErrorCategory.NUMERICAL: 3,
    ErrorCategory.IO: 4,
}


class ThermolimitError(Exception):
    """Base exception for all thermolimit errors.

    Attributes:
        message: Human-readable error description.
        category: Error classification, decides the exit code.
        module: Originating module name (e.g. "nuclei.sampler").
        context: Arbitrary key-value pairs for structured logging.
    """

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.message = message
        self.category = category
        self.module = module
        self.context = context
        super().__init__(message)

    @property
    def exit_code(self) -> int:
        """Process exit status for this failure."""
        return self.category.exit_code

    def to_report(self) -> dict:
        """Machine-readable error report (written by the CLI on failure)."""
        return {
            "error": self.__class__.__name__,
            "category": self.category.value,
            "module": self.module,
            "message": self.message,
            "context": {k: str(v) for k, v in self.context.items()},
        }

    def __str__(self) -> str:
        parts = [self.message or self.__class__.__name__]
        if self.module:
            parts.append(f"[module={self.module}]")
        if self.context:
            ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
            parts.append(f"({ctx})")
        return " ".join(parts)

    def __repr__(self) -> str:
        cls = self.__class__.__name__
        return (
            f"{cls}({self.message!r}, category={self.category.value!r}, "
            f"module={self.module!r})"
        )


# ---------------------------------------------------------------------------
# Configuration model
# ---------------------------------------------------------------------------

class LatticeError(ThermolimitError):
    """Invalid lattice data, or a vector that is not a lattice vector.

    Attributes:
        vector: The offending vector (if any).
    """

    def __init__(
        self,
        message: str = "",
        *,
        vector: Optional[Any] = None,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.vector = vector
        super().__init__(message, category=category, module=module or "nuclei.models", **context)


class SamplingError(ThermolimitError):
    """Configuration sampling precondition failed."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "nuclei.sampler", **context)


# ---------------------------------------------------------------------------
# Spatial statistics / moments
# ---------------------------------------------------------------------------

class SpatialIndexError(ThermolimitError):
    """Nearest-neighbor or cell statistic query failed."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "spatial", **context)


class EstimationError(ThermolimitError):
    """Monte Carlo estimation precondition failed."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "moments", **context)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

class GeometryError(ThermolimitError):
    """Invalid domain shape or geometric query."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "geometry", **context)


class UnsupportedShapeError(ThermolimitError):
    """The requested operation has no closed form for this shape variant.

    Attributes:
        shape: The shape kind that was rejected.
    """

    def __init__(
        self,
        message: str = "",
        *,
        shape: Optional[str] = None,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.shape = shape
        super().__init__(message, category=category, module=module or "geometry", **context)


# ---------------------------------------------------------------------------
# Electrostatics
# ---------------------------------------------------------------------------

class ElectrostaticsError(ThermolimitError):
    """Invalid charge system or cloud geometry."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "electrostatics", **context)


class ScreeningError(ThermolimitError):
    """No admissible screening cloud could be placed.

    Attributes:
        nucleus: Index of the nucleus in the configuration.
        position: Its position.
    """

    def __init__(
        self,
        message: str = "",
        *,
        nucleus: Optional[int] = None,
        position: Optional[Any] = None,
        category: ErrorCategory = ErrorCategory.NUMERICAL,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.nucleus = nucleus
        self.position = position
        super().__init__(
            message,
            category=category,
            module=module or "electrostatics.screening",
            nucleus=nucleus,
            **context,
        )


# ---------------------------------------------------------------------------
# Ergodic experiments
# ---------------------------------------------------------------------------

class ErgodicError(ThermolimitError):
    """Ergodic or scaling experiment precondition failed."""

    def __init__(
        self,
        message: str = "",
        *,
        category: ErrorCategory = ErrorCategory.PRECONDITION,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        super().__init__(message, category=category, module=module or "ergodic", **context)


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------


class SpecValidationError(ThermolimitError):
    """Experiment spec failed schema validation.

    Attributes:
        violations: Every violation found, not just the first.
    """

    def __init__(
        self,
        message: str = "",
        *,
        violations: Optional[List[str]] = None,
        category: ErrorCategory = ErrorCategory.SCHEMA,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.violations = list(violations or [])
        super().__init__(message, category=category, module=module or "harness", **context)

    def to_report(self) -> dict:
        report = super().to_report()
        report["violations"] = self.violations
        return report


class OutputError(ThermolimitError):
    """Reading a spec or writing outputs failed.

    Attributes:
        path: The file involved (if known).
    """

    def __init__(
        self,
        message: str = "",
        *,
        path: Optional[str] = None,
        category: ErrorCategory = ErrorCategory.IO,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.path = path
        super().__init__(
            message, category=category, module=module or "harness.outputs", path=path, **context
        )


class ConfigurationError(ThermolimitError):
    """Invalid settings file content.

    Attributes:
        setting_name: The offending key.
    """

    def __init__(
        self,
        message: str = "",
        *,
        setting_name: Optional[str] = None,
        category: ErrorCategory = ErrorCategory.SCHEMA,
        module: Optional[str] = None,
        **context: Any,
    ) -> None:
        self.setting_name = setting_name
        super().__init__(message, category=category, module=module or "config", **context)
