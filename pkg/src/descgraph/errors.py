"""Exception hierarchy shared by every module."""


class DescGraphError(Exception):
    """Base class for all errors raised by descgraph."""


class MalformedAddress(DescGraphError, ValueError):
    pass


class NotFound(DescGraphError, KeyError):
    pass


class PreconditionError(DescGraphError, ValueError):
    """An operation was called on inputs outside its contract."""


class InvariantViolation(DescGraphError, AssertionError):
    """A construction produced output that breaks a guaranteed property.

    This always indicates a bug in the library, never bad input.
    """


class MalformedPrefix(DescGraphError, ValueError):
    pass
