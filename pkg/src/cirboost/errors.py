"""Exception hierarchy shared by all modules."""


class CirBoostError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CirBoostError, ValueError):
    """Input lies outside the domain an operation is defined on."""


class DegenerateResponseError(DomainError):
    pass


class HessianDegenerateError(DomainError):
    pass


class EmptyGridError(DomainError):
    pass


class DegenerateFitError(DomainError):
    pass


class ShapeError(DomainError):
    pass


class DataParseError(CirBoostError, ValueError):
    """CSV ingestion failure; message names the offending row/column."""


class SchemaError(CirBoostError, ValueError):
    """Model file does not follow the expected layout."""


class UnsupportedVersionError(SchemaError):
    pass
