import asyncio
from typing import Any, Dict, Optional

import typer

from models.config_model import PipelineConfig
from services.config_service import config_service, deep_merge


def pipeline_config(ctx: typer.Context, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Configuration for one command: defaults, config file, then global and command flags."""
    options = ctx.obj or {}
    merged: Dict[str, Any] = {}
    if options.get("workers") is not None:
        merged["run"] = {"workers": options["workers"]}
    merged = deep_merge(merged, overrides or {})
    return asyncio.run(config_service.initialize(options.get("config"), merged))


def drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict without the flags that were not given."""
    out = {}
    for key, value in values.items():
        if isinstance(value, dict):
            value = drop_none(value)
            if value:
                out[key] = value
        elif value is not None:
            out[key] = value
    return out
