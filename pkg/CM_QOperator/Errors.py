########################################################################
## IMPORTS
########################################################################
import numpy as np

########################################################################
## ERRORS
########################################################################
# Every failure raised by the package derives from QOperatorError.
# The CLI maps each class to an exit code through its exit_code attribute.


class QOperatorError(Exception):
    exit_code = 3

    def __init__(self, message):
        if not str(message).startswith("Error"):
            message = "Error: " + str(message)
        super().__init__(message)


class ParameterError(QOperatorError, ValueError):
    exit_code = 2


class ConfigError(QOperatorError):
    exit_code = 2

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = "Error in config field '" + str(field) + "': " + str(message)
        super().__init__(message)


########################################################################
## NUMERIC FAILURES
########################################################################
class PoleError(QOperatorError, ArithmeticError):
    pass


class IrregularSpectralParameterError(QOperatorError):
    pass


class ResonantSpectralParameterError(QOperatorError):
    def __init__(self, message, weight=None):
        self.weight = weight
        super().__init__(message)


class WallCollisionError(QOperatorError):
    pass


class WallGuardError(QOperatorError):
    pass


class SeriesDivergenceError(QOperatorError):
    pass


class ToleranceUnreachableError(QOperatorError):
    def __init__(self, message, best_tail=None):
        self.best_tail = best_tail
        super().__init__(message)


class OracleRangeError(QOperatorError):
    pass


class EmptyGridError(QOperatorError):
    pass


class MemoryGuardError(QOperatorError):
    pass


class GridMismatchError(QOperatorError):
    pass


########################################################################
## EXIT CODES
########################################################################
EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# failures from outside the package; exit_code_for maps them too
NUMERIC_FAILURES = (ArithmeticError, np.linalg.LinAlgError)
IO_FAILURES = (OSError,)


def exit_code_for(error):
    if isinstance(error, QOperatorError):
        return error.exit_code
    if isinstance(error, IO_FAILURES):
        return EXIT_CONFIG
    return EXIT_NUMERIC
