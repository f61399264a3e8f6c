from __future__ import annotations


class PaveNetError(Exception):
    """Base class of all errors raised by the package."""


class DimensionError(PaveNetError, ValueError):
    pass


class ConfigError(PaveNetError, ValueError):
    """Invalid run configuration.

    Args:
        message (str): human readable description.
        keys (list[str] | None, optional): dotted names of the offending keys.
            Defaults to None.
    """

    def __init__(self, message: str, keys: list[str] | None = None) -> None:
        super().__init__(message)

        self.keys = keys or []


class CheckpointError(PaveNetError, ValueError):
    pass


class AnnotationParseError(PaveNetError, ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (byte offset {offset})")

        self.offset = offset


class AnnotationSchemaError(PaveNetError, ValueError):
    def __init__(self, message: str, key: str) -> None:
        super().__init__(message)

        self.key = key


class LayoutCapacityError(PaveNetError, ValueError):
    pass


class MatchingError(PaveNetError, ValueError):
    pass
