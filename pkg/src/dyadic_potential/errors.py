"""Exception hierarchy.

Everything raised on purpose by the package derives from ``DyadicError`` so
callers (and the CLI) can map failures onto exit codes.
"""


class DyadicError(Exception):
    """Base class for all package errors."""


class GeometryError(DyadicError, ValueError):
    """Nodes, sets or measures that do not belong to the expected geometry."""


class SizeLimitError(GeometryError):
    """A requested size exceeds a configured guard (depth, support, matrix)."""


class PreconditionError(DyadicError, ValueError):
    """Input violates a hypothesis of a construction.

    ``condition`` names the failed hypothesis and ``node`` (when meaningful)
    is the first offending node id, in the geometry the construction runs on.
    """

    def __init__(self, condition, message, node=None, **context):
        self.condition = condition
        self.node = node
        self.context = context
        where = f" at node {node}" if node is not None else ""
        super().__init__(f"[{condition}] {message}{where}")


class CertificateError(DyadicError, AssertionError):
    """A guarantee that should hold by construction failed on re-verification."""

    def __init__(self, message, **context):
        self.context = context
        super().__init__(message)


class ConvergenceError(DyadicError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    ``best`` carries the best iterate found so far.
    """

    def __init__(self, message, best=None, **context):
        self.best = best
        self.context = context
        super().__init__(message)


class GeneratorError(DyadicError, RuntimeError):
    """A random generator could not produce a valid instance."""


class ParseError(DyadicError, ValueError):
    """Malformed input file; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{message}{where}")
