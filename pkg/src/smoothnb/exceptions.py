"""Exception hierarchy.

Every error raised on bad input derives from :class:`SmoothNBError`, which is
itself a ``ValueError`` so callers that only care about "bad value" can catch
the builtin.
"""


class SmoothNBError(ValueError):
    """Base class for all validation errors raised by this package."""


class SchemaError(SmoothNBError):
    pass


class ColumnCountMismatch(SmoothNBError):
    def __init__(self, row, expected, got):
        self.row, self.expected, self.got = row, expected, got
        super().__init__(f"row {row}: expected {expected} columns, got {got}")


class OutOfBounds(SmoothNBError):
    def __init__(self, attribute, row, value, lower=None, upper=None):
        self.attribute, self.row, self.value = attribute, row, value
        bounds = "" if lower is None else f" (bounds [{lower}, {upper}])"
        super().__init__(f"row {row}: {attribute}={value!r} is out of bounds{bounds}")


class UnknownCategory(SmoothNBError):
    def __init__(self, attribute, row, value):
        self.attribute, self.row, self.value = attribute, row, value
        super().__init__(f"row {row}: {attribute}={value!r} is not a declared value")


class MissingValue(SmoothNBError):
    def __init__(self, row, attribute=None):
        self.row, self.attribute = row, attribute
        where = f" in column {attribute}" if attribute else ""
        super().__init__(f"row {row}: missing value{where}")


class TooFewRows(SmoothNBError):
    pass


class TrimTooLarge(SmoothNBError):
    pass


class BadK(SmoothNBError):
    pass


class SampleTooSmall(SmoothNBError):
    pass


class GammaOutOfRange(SmoothNBError):
    pass


class DeltaOutOfRange(SmoothNBError):
    pass


class DegenerateClass(SmoothNBError):
    def __init__(self, attribute, label, count):
        self.attribute, self.label, self.count = attribute, label, count
        super().__init__(
            f"class {label!r} has {count} observation(s) of numeric attribute "
            f"{attribute!r}; at least 2 are required"
        )


class ModelFormatError(SmoothNBError):
    pass
