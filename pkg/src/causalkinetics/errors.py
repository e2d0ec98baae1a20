"""Exception types shared across the package."""


class ParseError(ValueError):
    """Raised for malformed text input (reaction DSL, expressions, model files).

    ``line`` and ``column`` are 1-based; either may be ``None`` when unknown.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ModelError(ValueError):
    """A model, network or intervention violates a structural invariant."""


class IntegrationError(RuntimeError):
    """Numerical integration failed (blow-up, non-finite state)."""


class SolvabilityError(RuntimeError):
    """A static SCM could not be solved (non-convergent cycle, cycle in stochastic form)."""


class DatasetFormatError(ValueError):
    """A dataset file is malformed."""


class DiscoveryError(ValueError):
    """Invalid discovery request (empty search space, degenerate grid)."""
