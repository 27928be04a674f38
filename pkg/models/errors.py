from typing import Optional


class Spl3dError(Exception):
    """Base class for every error raised by the toolkit."""


class NonPositiveDepth(Spl3dError, ValueError):
    pass


class CornerBehindCamera(Spl3dError, ValueError):
    pass


class UnmappedCategory(Spl3dError, ValueError):
    pass


class UnknownCategory(Spl3dError, ValueError):
    pass


class DegenerateBox(Spl3dError, ValueError):
    pass


class NonDifferentiablePoint(Spl3dError, ValueError):
    pass


class PlacementExhausted(Spl3dError, RuntimeError):
    pass


class DatasetError(Spl3dError):
    """Dataset I/O failure, always reported with the offending path."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SchemaMismatch(DatasetError):
    pass


class MalformedRecord(DatasetError):
    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message, path)


class MissingRaster(DatasetError):
    pass


class ConfigError(Spl3dError):
    pass
