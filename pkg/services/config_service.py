"""
Config Service - configuration loading and logging setup

Provides:
- load_config / get_config: config.yaml parsed with pyyaml, cached process-wide
- apply_overrides: dotted section.key=value overrides (values parsed as yaml)
- read_plain_config: plain-text key=value files for the CLI --config flag
- setup_logging: handlers and format from the logging section
- max_workers: thread cap for studies (ERKC_MAX_WORKERS from .env wins)
"""

import copy
import logging
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv

from tools.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config.yaml"
MAX_WORKERS_ENV = "ERKC_MAX_WORKERS"

# Global config cache
_config: Optional[Dict] = None
_logging_configured = False


def load_config(path: Optional[Union[str, Path]] = None) -> Dict:
    """
    Read a yaml configuration file.

    Args:
        path: File to read (defaults to config.yaml at the repository root)

    Returns:
        Nested configuration dict

    Raises:
        ConfigError: file missing or not a mapping
    """
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid yaml in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"configuration in {path} must be a mapping")
    return data


def get_config() -> Dict:
    """
    Get the default configuration, loading it on first use.

    Returns a deep copy so callers may apply overrides freely.
    """
    global _config
    if _config is None:
        load_dotenv()
        _config = load_config()
    return copy.deepcopy(_config)


def reset_config() -> None:
    """Forget the cached configuration (tests)."""
    global _config
    _config = None


def _split_pair(pair: str) -> Tuple[str, str]:
    if "=" not in pair:
        raise ConfigError(f"override '{pair}' is not of the form section.key=value")
    key, value = pair.split("=", 1)
    return key.strip(), value.strip()


def apply_overrides(config: Dict, pairs: Iterable[str]) -> Dict:
    """
    Apply section.key=value overrides to a copy of config.

    Only keys already present in config may be overridden.

    Raises:
        ConfigError: malformed pair or unknown key
    """
    result = copy.deepcopy(config)
    for pair in pairs:
        key, raw = _split_pair(pair)
        parts = key.split(".")
        node = result
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown configuration section '{key}'")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown configuration key '{key}'")
        try:
            node[parts[-1]] = yaml.safe_load(raw) if raw else ""
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse value for '{key}': {raw}") from exc
    return result


def read_plain_config(path: Union[str, Path]) -> List[str]:
    """
    Read a plain-text config file: one key=value per line, '#' starts a comment.

    Returns:
        List of override pairs for apply_overrides
    """
    pairs = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
        pairs.append(line)
    return pairs


def setup_logging(config: Dict, force: bool = False) -> None:
    """Configure the root logger from the logging section (once per process)."""
    global _logging_configured
    if _logging_configured and not force:
        return
    section = config.get("logging", {})
    level = getattr(logging, str(section.get("level", "INFO")).upper(), None)
    if not isinstance(level, int):
        raise ConfigError(f"unknown log level '{section.get('level')}'")
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if section.get("log_to_file"):
        log_file = Path(section.get("log_file", "./logs/erkc.log"))
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=level,
        format=section.get("log_format", "[%(asctime)s] %(levelname)s - %(name)s - %(message)s"),
        handlers=handlers,
        force=True,
    )
    _logging_configured = True


def max_workers(config: Dict) -> int:
    """Thread cap for studies: ERKC_MAX_WORKERS if set, harness.max_workers otherwise."""
    load_dotenv()
    raw = os.getenv(MAX_WORKERS_ENV)
    if raw is None:
        value = config.get("harness", {}).get("max_workers", 1)
    else:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{MAX_WORKERS_ENV} must be an integer, got '{raw}'") from None
    if int(value) < 1:
        raise ConfigError(f"max_workers must be >= 1, got {value}")
    return int(value)
