"""Exception types shared across the package."""


class CFSError(Exception):
    """Base class for all errors raised by cfsnmf."""


class EdgeListParseError(CFSError, ValueError):
    """A line of an edge-list or ground-truth file could not be parsed."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DomainError(CFSError, ValueError):
    """An input value lies outside the admissible domain (negative weight, p_out > p_in, ...)."""


class ContractViolation(CFSError, ValueError):
    """Arguments violate a precondition such as matching dimensions."""


class UndefinedMetricError(CFSError, ValueError):
    """The requested metric is undefined for the given input (e.g. modularity of an edgeless graph)."""


class NumericalError(CFSError, FloatingPointError):
    """A factor matrix picked up NaN or Inf during the multiplicative updates."""

    def __init__(self, message="non-finite entry in latent factors", iteration=None):
        self.iteration = iteration
        self.detail = message
        super().__init__(self._format())

    def _format(self):
        if self.iteration is None:
            return self.detail
        return f"{self.detail} at iteration {self.iteration}"

    def at_iteration(self, iteration):
        self.iteration = iteration
        self.args = (self._format(),)
        return self
