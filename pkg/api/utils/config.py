# api/utils/config.py
"""
Run configuration: environment defaults, JSON config files and CLI overrides,
merged in that order of increasing precedence into a validated RunConfig.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from api.schemas.verification import RunConfig
from api.utils.errors import ConfigError, GenericityError
from api.utils.qkz_operators import ModelParams

logger = logging.getLogger(__name__)


def load_environment() -> str:
    """Load environments/{ENVIRONMENT}/.env, falling back to the root .env"""
    environment = os.getenv("ENVIRONMENT", "development")
    env_file = f"environments/{environment}/.env"
    if os.path.exists(env_file):
        load_dotenv(env_file, override=True)
        logger.debug(f"Loaded {environment} environment from {env_file}")
    else:
        load_dotenv()
        logger.debug(f"Could not find {env_file}, using default .env")
    return environment


def environment_defaults() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if os.getenv("QKZ_SEED"):
        out["seed"] = int(os.environ["QKZ_SEED"])
    if os.getenv("QKZ_WORKERS"):
        out["workers"] = int(os.environ["QKZ_WORKERS"])
    if os.getenv("QKZ_TOL"):
        out["quadrature"] = {"tol": float(os.environ["QKZ_TOL"])}
    return out


def read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: config must be an object")
    return data


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                data: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Validated RunConfig from env defaults < config file (or data) < overrides"""
    merged = environment_defaults()
    if path:
        merged = deep_merge(merged, read_config_file(path))
    if data:
        merged = deep_merge(merged, data)
    if overrides:
        merged = deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigError(f"{field}: {first['msg']}", field=field) from exc
    _check_z(config)
    return config


def _check_z(config: RunConfig):
    if config.z.explicit is None:
        return
    z = [v.to_complex() for v in config.z.explicit]
    if config.n_values is None:
        config.n_values = [len(z)]
    for n in config.n_values:
        if n != len(z):
            raise ConfigError(f"explicit z has {len(z)} entries but n={n}", field="z.explicit")
    try:
        ModelParams(n=len(z), ell=0, hbar=config.hbar, mu=config.mu_value(), z=z)
    except GenericityError as exc:
        raise ConfigError(str(exc), field="z.explicit") from exc
