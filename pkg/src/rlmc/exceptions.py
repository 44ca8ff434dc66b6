"""Exception hierarchy shared across the solver modules."""


class RLMCError(Exception):
    """Base class; ``record()`` gives a machine-readable summary for the CLI."""

    kind = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = {k: v for k, v in context.items() if v is not None}

    def record(self):
        out = {"kind": self.kind, "type": type(self).__name__, "message": str(self)}
        out.update(self.context)
        return out


class ArgumentError(RLMCError, ValueError):
    kind = "argument"


class ConfigurationError(RLMCError, ValueError):
    """Invalid configuration; ``errors`` lists every violated field."""

    kind = "configuration"

    def __init__(self, message, errors=None, **context):
        super().__init__(message, **context)
        self.errors = list(errors or [])
        if self.errors:
            self.context["errors"] = self.errors


class ConstructionError(RLMCError, ValueError):
    kind = "construction"


class BasisConditioningError(RLMCError, ArithmeticError):
    kind = "numerical"


class NumericalError(RLMCError, ArithmeticError):
    """Raised with ``module``, ``n`` and ``m`` in the context when known."""

    kind = "numerical"


class DataError(RLMCError, ValueError):
    kind = "data"


class CapabilityError(RLMCError, NotImplementedError):
    kind = "capability"
