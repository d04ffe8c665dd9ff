"""
Settings loading.

Reads an optional JSON configuration file, applies command-line overrides
and validates the result through the Settings model.
"""

import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Generator, Optional

from pydantic import ValidationError

from .errors import AtcwsError
from .models import Settings

logger = logging.getLogger(__name__)

CONFIG_PATH = Path("atcws.json")
CONFIG_ENV = "ATCWS_CONFIG"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def config_path(path: Optional[Path] = None) -> Optional[Path]:
    """
    Locate the configuration file.

    Args:
        path: Explicit path, if the caller has one.

    Returns:
        The explicit path, else the ATCWS_CONFIG path, else ./atcws.json when
        it exists, else None.
    """
    if path is not None:
        return Path(path)
    env = os.environ.get(CONFIG_ENV)
    if env:
        return Path(env)
    if CONFIG_PATH.exists():
        return CONFIG_PATH
    return None


def load_settings(
    path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Settings:
    """
    Build validated settings.

    Args:
        path: Optional JSON config file.
        overrides: Flag values; None entries are ignored.

    Returns:
        Validated settings.

    Raises:
        AtcwsError: exit 3 if the file is missing, unreadable or invalid.
    """
    values: Dict[str, Any] = {}
    source = config_path(path)
    if source is not None:
        if not source.exists():
            raise AtcwsError(f"Config file not found: {source}")
        try:
            values.update(json.loads(source.read_text()))
        except json.JSONDecodeError as exc:
            raise AtcwsError(f"Config file {source} is not valid JSON: {exc}")
        logger.debug("loaded settings from %s", source)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return Settings(**values)
    except ValidationError as exc:
        raise AtcwsError(f"Invalid settings: {exc.errors()[0]['loc'][0]}: {exc.errors()[0]['msg']}")


@contextmanager
def settings_scope(
    path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Generator[Settings, None, None]:
    """
    Context manager for the settings of one command.

    Configures logging at the requested level on entry.

    Yields:
        Validated settings.

    Example:
        with settings_scope(overrides={"max_sigma": 6}) as settings:
            explore(network, settings.max_sigma)
    """
    settings = load_settings(path, overrides)
    configure_logging(settings.log_level)
    try:
        yield settings
    finally:
        logger.debug("command finished")


def configure_logging(level: str = "WARNING") -> None:
    """Send log records to stderr so reports on stdout stay byte-stable."""
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
