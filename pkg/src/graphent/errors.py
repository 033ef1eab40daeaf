"""Exception hierarchy shared by every layer of the toolkit."""


class GraphentError(Exception):
    """Base class for all toolkit errors."""


class ContractViolation(GraphentError, ValueError):
    """An input broke a numeric precondition (Hermiticity, trace, shape)."""


class UnreachableBranch(GraphentError, ValueError):
    """A projective outcome has (numerically) zero probability."""


class ValidationError(GraphentError, ValueError):
    """A config or dataset document failed schema or invariant checks."""


class CoverageError(GraphentError):
    """Required data (settings, quads, stabilizer supports) is missing."""
