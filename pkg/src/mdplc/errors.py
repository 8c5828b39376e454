"""Exception hierarchy and diagnostics shared across the toolkit."""

from dataclasses import dataclass


class MdplcError(Exception):
    """Base class for all toolkit errors."""


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.line}:{self.col}: {self.message}"


class ParseError(MdplcError):
    """Raised on malformed input text; carries positioned diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class ModelError(MdplcError):
    """Semantic violation in a domain or graph (bad probabilities, etc.)."""


class GroundingError(MdplcError):
    """A binding required by an effect or expression could not be produced."""


class EvalError(MdplcError):
    """Expression evaluation failure: unbound variable, division by zero."""


class EncodingError(MdplcError):
    """State-variable extraction failed or is out of declared range."""


class CapExceeded(MdplcError):
    """Reachable state space exceeded the configured cap."""


class NotEnabled(MdplcError):
    """An action was referenced in a state where it has no edges."""


class UnsupportedConstruct(MdplcError):
    """Input uses a feature outside the supported subset."""
