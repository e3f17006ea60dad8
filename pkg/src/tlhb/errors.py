"""Exception hierarchy shared by every module."""


class TlhbError(Exception):
    """Base class; ``name`` is the short tag written into CLI error reports."""

    @property
    def name(self):
        return type(self).__name__


class NonSymmetric(TlhbError, ValueError):
    pass


class NotSpd(TlhbError, ValueError):
    pass


class DegenerateSpectrum(TlhbError, ArithmeticError):
    pass


class InvalidSize(TlhbError, ValueError):
    pass


class RankConditionUnreachable(TlhbError, ValueError):
    pass


class InvalidDecomposition(TlhbError, ValueError):
    pass


class NotConvergent(TlhbError, ValueError):
    """The smoother violates the SPD requirement on M_s + M_s^T - A_s."""


class NotSquareCase(TlhbError, ValueError):
    pass


class InvalidCoarseSize(TlhbError, ValueError):
    pass


class NotNested(TlhbError, ValueError):
    pass


class SingularComplement(TlhbError, ArithmeticError):
    pass


class ParseError(TlhbError, ValueError):
    pass


class NotConverged(TlhbError, RuntimeError):
    """Raised by :func:`tlhb.iteration.solve`; carries the partial history."""

    def __init__(self, message, u=None, history=None):
        super().__init__(message)
        self.u = u
        self.history = history


class BoundViolation(TlhbError, AssertionError):
    """A two-sided bound failed; ``data`` holds every input of the check."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data or {}
