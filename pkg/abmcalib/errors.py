"""Exceptions raised by the calibration package."""


class CalibrationError(Exception):
    """Base class of every error raised by abmcalib."""


class WrongArity(CalibrationError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"expected {expected} parameters, got {got}")
        self.expected = expected
        self.got = got


class OutOfRange(CalibrationError):
    def __init__(self, index: int, value: float, low: float, high: float) -> None:
        """
        :param index: 1-based parameter index
        """
        super().__init__(
            f"parameter {index} = {value!r} outside open interval ({low}, {high})"
        )
        self.index = index
        self.value = value


class AllZeroSeries(CalibrationError):
    def __init__(self) -> None:
        super().__init__("series has no infected mass, its CDF is undefined")


class LengthMismatch(CalibrationError):
    pass


class UnsupportedAlpha(CalibrationError):
    pass


class UnsupportedDimension(CalibrationError):
    pass


class IndexOverflow(CalibrationError):
    pass


class BadRange(CalibrationError):
    pass


class PoolExhausted(CalibrationError):
    pass


class TooFewRows(CalibrationError):
    pass


class SingleClass(CalibrationError):
    pass


class ArityMismatch(CalibrationError):
    pass


class EmptyDb(CalibrationError):
    pass


class DuplicateVector(CalibrationError):
    pass


class SchemaError(CalibrationError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ConfigInvalid(CalibrationError):
    pass
