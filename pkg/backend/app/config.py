from __future__ import annotations

import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError, field_validator

from .errors import ConfigurationError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


class Settings(BaseModel):
    max_cells: int = 10**8
    search_bound: int = 12
    log_level: str = "INFO"

    @field_validator("max_cells", "search_bound")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("log_level")
    @classmethod
    def _level(cls, value: str) -> str:
        value = value.upper()
        if value not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {value!r}")
        return value


@lru_cache
def get_settings() -> Settings:
    load_dotenv()
    raw = {
        "max_cells": os.getenv("WALLKIT_MAX_CELLS"),
        "search_bound": os.getenv("WALLKIT_SEARCH_BOUND"),
        "log_level": os.getenv("WALLKIT_LOG_LEVEL"),
    }
    try:
        return Settings(**{k: v for k, v in raw.items() if v is not None})
    except ValidationError as exc:
        raise ConfigurationError(f"invalid wallkit settings: {exc}") from exc
