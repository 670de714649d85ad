"""
Configuration loading for the sgglab laboratory.

Reads the YAML defaults in config/config.yaml. Command-line flags always
override values found here; values missing here fall back to the
dataclass defaults of the owning module.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from .exceptions import ConfigurationError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "config.yaml"

logger = logging.getLogger("sgglab.config")


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load configuration from a YAML file.

    Args:
        path: Config file path (defaults to config/config.yaml)

    Returns:
        Configuration dictionary (empty when the default file is absent)

    Raises:
        ConfigurationError: If an explicit file is missing or the YAML is invalid
    """
    explicit = path is not None
    config_path = Path(path) if explicit else DEFAULT_CONFIG_PATH

    if not config_path.exists():
        if explicit:
            raise ConfigurationError(f"Config file not found: {config_path}")
        logger.debug(f"No config file at {config_path}, using built-in defaults")
        return {}

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"YAML syntax error in {config_path}: {str(e)}")
    except OSError as e:
        raise ConfigurationError(f"Failed to read config {config_path}: {str(e)}")

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigurationError(f"Config root must be a mapping, got {type(config).__name__}")

    logger.debug(f"Loaded configuration from {config_path}")
    return config


def get_section(config: Mapping[str, Any], name: str) -> Dict[str, Any]:
    """Return a config section as a dict, empty when missing."""
    section = config.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigurationError(f"Config section '{name}' must be a mapping")
    return dict(section)
