"""Exception hierarchy shared by all modules."""


class VarregError(Exception):
    pass


class ParseError(VarregError):
    """Malformed expression text; ``offset`` is a byte offset into the input."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class ExponentError(ParseError):
    pass


class EvaluationError(VarregError):
    pass


class UnboundVariableError(EvaluationError):
    pass


class DomainError(EvaluationError):
    """Raised with the offending node and, for array input, the first bad index."""

    def __init__(self, message, node=None, index=None, t=None):
        where = []
        if node is not None:
            where.append(f"node {node}")
        if index is not None:
            where.append(f"index {index}")
        if t is not None:
            where.append(f"t={t!r}")
        super().__init__(message + (f" [{', '.join(where)}]" if where else ""))
        self.node = node
        self.index = index
        self.t = t


class NonSmoothError(VarregError):
    """Symbolic differentiation through ``abs``."""


class BoundaryError(VarregError):
    pass


class BasisError(VarregError):
    pass


class SolverError(VarregError):
    pass


class RegularityError(VarregError):
    """A regularity hypothesis failed numerically."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)


class NotCriticalError(RegularityError):
    pass


class DegeneracyError(RegularityError):
    pass


class MonotonicityError(RegularityError):
    pass


class SurjectivityError(RegularityError):
    pass


class BoxError(VarregError):
    pass


class ConfigError(VarregError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
