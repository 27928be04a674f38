import copy
import logging
import os
from typing import Any, Dict, Mapping, Optional

import aiofiles
import toml

from models.config_model import PipelineConfig
from models.errors import ConfigError

logger = logging.getLogger(__name__)

SERVER_DIR = os.path.dirname(os.path.dirname(__file__))
USER_DATA_DIR = os.getenv(
    "USER_DATA_DIR",
    os.path.join(SERVER_DIR, "user_data"),
)


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Nested dict merge; values of override win, tables merge key by key."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def default_config_file() -> str:
    return os.getenv("CONFIG_PATH", os.path.join(USER_DATA_DIR, "config.toml"))


class ConfigService:
    """Pipeline configuration: defaults, then the TOML file, then command-line overrides."""

    def __init__(self):
        self.config = PipelineConfig()
        self.config_file = default_config_file()

    async def initialize(self, config_file: Optional[str] = None,
                         overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
        explicit = config_file is not None
        self.config_file = config_file or default_config_file()
        data: Dict[str, Any] = {}
        if self.exists_config():
            async with aiofiles.open(self.config_file, "r", encoding="utf-8") as f:
                content = await f.read()
            try:
                data = toml.loads(content)
            except toml.TomlDecodeError as e:
                raise ConfigError(f"{self.config_file}: invalid TOML: {e}") from e
            logger.debug("loaded config file %s", self.config_file)
        elif explicit:
            raise ConfigError(f"{self.config_file}: config file not found")
        else:
            logger.debug("no config file at %s, using defaults", self.config_file)

        # pydantic ValidationError propagates with the offending field named
        self.config = PipelineConfig.model_validate(deep_merge(data, overrides or {}))
        return self.config

    def exists_config(self) -> bool:
        return os.path.exists(self.config_file)


config_service = ConfigService()
