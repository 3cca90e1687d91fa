"""Exception hierarchy shared by the engine modules."""

from typing import Optional


class PorousCurvesError(Exception):
    """Base class for every error raised by porous-curves."""


class DomainError(PorousCurvesError, ValueError):
    """An argument lies outside the domain of an operation."""


class ParameterError(PorousCurvesError, ValueError):
    """Parameters violate one of the inequalities an operation relies on."""


class CantorConstructionError(ParameterError):
    """The removed interval at some level does not fit inside its parent."""

    def __init__(self, level: int, message: str):
        super().__init__(f"Cantor construction infeasible at level {level}: {message}")
        self.level = level


class DepthError(PorousCurvesError):
    """The truncation depth of a set is too shallow for the requested query."""

    def __init__(self, required_depth: int, available_depth: int):
        super().__init__(
            f"Depth {available_depth} is insufficient, depth {required_depth} is required"
        )
        self.required_depth = required_depth
        self.available_depth = available_depth


class ResolutionError(PorousCurvesError):
    """No hole could be certified above the resolution floor of an oracle."""

    NOT_POROUS = "not-porous-at-scale"
    DEPTH_EXHAUSTED = "depth-exhausted"
    BELOW_FLOOR = "below-floor"

    def __init__(self, reason: str, message: str):
        super().__init__(f"{message} ({reason})")
        self.reason = reason


class PreconditionError(PorousCurvesError, ValueError):
    """An operation was called on inputs that violate its stated precondition."""


class InvariantViolation(PorousCurvesError, AssertionError):
    """A re-verified guarantee failed. This always points at a bug upstream."""

    def __init__(self, step: str, message: str):
        super().__init__(f"[{step}] {message}")
        self.step = step


class ConfigError(PorousCurvesError, ValueError):
    """An experiment config failed schema validation."""

    def __init__(self, message: str, path: Optional[str] = None):
        location = f" at '{path}'" if path else ""
        super().__init__(f"Invalid experiment config{location}: {message}")
        self.path = path
