"""Exception hierarchy. CLI exit codes are attached to each class."""


class EconfitError(Exception):
    exit_code = 2


class ConfigError(EconfitError):
    exit_code = 1


class DataError(EconfitError, ValueError):
    exit_code = 2


class ParseError(DataError):
    pass


class EmptyYearError(DataError):
    pass


class DuplicateKeyError(DataError):
    pass


class NumericalError(EconfitError, ArithmeticError):
    exit_code = 3


class UnprunedMatrixError(NumericalError, ValueError):
    pass


class CollinearityError(NumericalError, ValueError):
    pass
