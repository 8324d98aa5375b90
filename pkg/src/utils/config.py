"""
Runtime settings and config-file loading.

Precedence (lowest first): built-in defaults, environment (``.env`` honoured
via python-dotenv), config file (JSON or YAML), command-line flags.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.errors import ConfigError

ENV_PREFIX = "KERRSIM_"
DEFAULT_SEED = 20050101


class Settings(BaseModel):
    """Process-wide defaults."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    log_level: str = "WARNING"
    log_json: bool = False
    jobs: int = Field(default=1, ge=1)
    grid_step: float = Field(default=1e-2, gt=0.0, le=1e-2)
    grid_span: float = Field(default=10.0, gt=0.0)


def load_settings(env_file: Optional[Union[str, Path]] = None) -> Settings:
    """Build Settings from ``KERRSIM_*`` environment variables."""
    load_dotenv(dotenv_path=env_file, override=False)
    raw: Dict[str, Any] = {}
    for field in Settings.model_fields:
        value = os.environ.get(ENV_PREFIX + field.upper())
        if value not in (None, ""):
            raw[field] = value
    try:
        return Settings(**raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid {ENV_PREFIX}* environment: {exc}") from exc


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON or YAML mapping; YAML's loader accepts JSON as-is."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping, got {type(data).__name__}")
    return {str(key).replace("-", "_"): value for key, value in data.items()}
