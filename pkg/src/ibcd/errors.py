"""Exception types raised across the package."""


class IBCDError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(IBCDError, ValueError):
    pass


class InvalidConfig(IBCDError, ValueError):
    pass


class InvalidInput(IBCDError, ValueError):
    pass


class AssumptionViolation(IBCDError):
    """The patch is larger than the admissible bound the search relies on."""


class UndefinedRate(IBCDError, ZeroDivisionError):
    pass


class GenerationError(IBCDError, ValueError):
    pass


class BridgeError(IBCDError):
    """Failure talking to an external classifier process.

    ``payload`` holds the raw line (or stderr tail) that triggered the error.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload
