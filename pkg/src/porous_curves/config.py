import os
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv(override=True)

DEFAULTS = {
    "POROUS_LOG_LEVEL": "INFO",
    "POROUS_OUT_DIR": "./runs",
    "POROUS_DEFAULT_SEED": "0",
    "POROUS_MAX_BISECTION_DEPTH": "40",
}


@dataclass(frozen=True)
class Settings:
    """Process-wide defaults; experiment configs and CLI flags override them."""

    log_level: str
    out_dir: Path
    default_seed: int
    max_bisection_depth: int


def _int_setting(name: str) -> int:
    raw = os.environ.get(name, DEFAULTS[name])
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {raw!r}")


def require_settings(names: Iterable[str]) -> dict[str, str]:
    """Read variables that have no default for this caller"""
    values = {name: os.environ.get(name) for name in names}
    missing_vars = [name for name, value in values.items() if not value]
    if missing_vars:
        raise ValueError(f"Missing required environment variables: {', '.join(missing_vars)}")
    return values


def get_settings() -> Settings:
    """Get settings from the environment"""
    level = os.environ.get("POROUS_LOG_LEVEL", DEFAULTS["POROUS_LOG_LEVEL"]).upper()
    if level not in logging.getLevelNamesMapping():
        raise ValueError(f"Environment variable POROUS_LOG_LEVEL is not a logging level: {level!r}")
    depth = _int_setting("POROUS_MAX_BISECTION_DEPTH")
    if depth < 1:
        raise ValueError(f"Environment variable POROUS_MAX_BISECTION_DEPTH must be positive, got {depth}")
    settings = Settings(
        log_level=level,
        out_dir=Path(os.environ.get("POROUS_OUT_DIR", DEFAULTS["POROUS_OUT_DIR"])),
        default_seed=_int_setting("POROUS_DEFAULT_SEED"),
        max_bisection_depth=depth,
    )
    logger.debug(f"Resolved settings: {settings}")
    return settings
