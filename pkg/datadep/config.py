"""
Configuration for datadep
Reads the DATADEP_* environment variables (optionally seeded from a .env file)
"""

import os
from dataclasses import dataclass
from typing import Mapping, Optional

from dotenv import find_dotenv, load_dotenv

ENV_LOAD_PATH = "DATADEP_LOAD_PATH"
ENV_STORE = "DATADEP_STORE"
ENV_ALWAYS_ACCEPT = "DATADEP_ALWAYS_ACCEPT"
ENV_DISABLE_DOWNLOAD = "DATADEP_DISABLE_DOWNLOAD"
ENV_MANIFEST = "DATADEP_MANIFEST"
ENV_LOG_LEVEL = "DATADEP_LOG_LEVEL"
ENV_TIMEOUT = "DATADEP_TIMEOUT"

DEFAULT_MANIFEST = "DataDeps.toml"
DEFAULT_TIMEOUT_SECS = 60.0
CONNECT_TIMEOUT_SECS = 10.0

_FALSY = {"", "0", "false", "no"}


def load_env_file() -> None:
    """Load a .env file from the working directory without overriding real variables"""
    path = find_dotenv(usecwd=True)
    if path:
        load_dotenv(path, override=False)


def is_set(env: Mapping[str, str], key: str) -> bool:
    """True when ``key`` is present with a value that does not read as false"""
    value = env.get(key)
    return value is not None and value.strip().lower() not in _FALSY


@dataclass(frozen=True)
class Settings:
    manifest_path: str
    log_level: str
    timeout_secs: float
    downloads_disabled: bool
    store_override: Optional[str]


def get_settings(env: Optional[Mapping[str, str]] = None) -> Settings:
    """
    Build settings from an environment mapping

    Args:
        env: Name to value mapping, defaults to ``os.environ``

    Returns:
        Settings instance
    """
    if env is None:
        env = os.environ

    try:
        timeout = float(env.get(ENV_TIMEOUT, DEFAULT_TIMEOUT_SECS))
        if timeout <= 0:
            timeout = DEFAULT_TIMEOUT_SECS
    except ValueError:
        timeout = DEFAULT_TIMEOUT_SECS

    return Settings(
        manifest_path=env.get(ENV_MANIFEST) or DEFAULT_MANIFEST,
        log_level=env.get(ENV_LOG_LEVEL) or "WARNING",
        timeout_secs=timeout,
        downloads_disabled=is_set(env, ENV_DISABLE_DOWNLOAD),
        store_override=env.get(ENV_STORE) or None,
    )
