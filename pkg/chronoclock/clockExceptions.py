class ChronoClockException(Exception):

    def __init__(self, message, code=500):
        """Initialize the exception."""
        super(ChronoClockException, self).__init__(message)
        self.code = code


class GeneralException(ChronoClockException):
    """An unclassified, general error. Default code is 500."""

    def __init__(self, message, code=500):
        """Initialize the exception."""
        super(GeneralException, self).__init__(message, code)


class InputException(ChronoClockException):
    """Represents argument and precondition errors such as a non-positive time. Default code is 400."""

    def __init__(self, message, code=400):
        """Initialize the exception."""
        super(InputException, self).__init__(message, code)


class GridException(InputException):
    """Represents a lattice that cannot represent the requested state. Default code is 400."""

    def __init__(self, message, code=400):
        """Initialize the exception."""
        super(GridException, self).__init__(message, code)


class StabilityException(ChronoClockException):
    """Represents a time step whose phase per step is too large. Default code is 422."""

    def __init__(self, message, code=422):
        """Initialize the exception."""
        super(StabilityException, self).__init__(message, code)


class BoundaryException(ChronoClockException):
    """Represents probability reaching the edges of the periodic box. Default code is 409."""

    def __init__(self, message, code=409):
        """Initialize the exception."""
        super(BoundaryException, self).__init__(message, code)


class TruncationException(ChronoClockException):
    """Represents a clock eigenbasis truncation that loses too much of the initial clock state. Default code is 422."""

    def __init__(self, message, code=422):
        """Initialize the exception."""
        super(TruncationException, self).__init__(message, code)


class RegionExitException(ChronoClockException):
    """Represents a packet that is still inside the clock region at the final time. Default code is 409."""

    def __init__(self, message, code=409):
        """Initialize the exception."""
        super(RegionExitException, self).__init__(message, code)


class WindowException(ChronoClockException):
    """Represents a time window that misses part of a distribution. Default code is 422."""

    def __init__(self, message, code=422):
        """Initialize the exception."""
        super(WindowException, self).__init__(message, code)


class RegimeException(ChronoClockException):
    """Represents an experiment refusing a config outside its coupling regime. Default code is 403."""

    def __init__(self, message, code=403):
        """Initialize the exception."""
        super(RegimeException, self).__init__(message, code)


class ConvergenceException(ChronoClockException):
    """Represents a quadrature or extrapolation that did not converge. Default code is 504."""

    def __init__(self, message, code=504):
        """Initialize the exception."""
        super(ConvergenceException, self).__init__(message, code)


class ResourceException(ChronoClockException):
    """Represents a run whose estimated work exceeds the configured limit. Default code is 507."""

    def __init__(self, message, code=507):
        """Initialize the exception."""
        super(ResourceException, self).__init__(message, code)


class DataException(ChronoClockException):
    """Represents a malformed config or artifact. Default code is 502."""

    def __init__(self, message, code=502):
        """Initialize the exception."""
        super(DataException, self).__init__(message, code)
