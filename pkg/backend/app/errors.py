from __future__ import annotations

from typing import Any


class WallkitError(Exception):
    """Base class for every error raised by the library."""


class InputError(WallkitError, ValueError):
    """Malformed or out-of-domain input."""


class HypothesisError(InputError):
    """The lattice does not satisfy the U^2 + N hypothesis of the Eichler criterion."""


class OnWallError(InputError):
    def __init__(self, message: str, wall: Any = None) -> None:
        super().__init__(message)
        self.wall = wall


class ConfigurationError(WallkitError):
    pass


class EnumerationLimitError(WallkitError):
    def __init__(self, limit: int) -> None:
        super().__init__(
            f"enumeration exceeded WALLKIT_MAX_CELLS={limit}; "
            "raise the cap or shrink the query"
        )
        self.limit = limit
