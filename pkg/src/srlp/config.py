"""TOML run configuration with flags > file > defaults precedence."""

from __future__ import annotations

import sys
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = ("model", "train", "label", "split", "strategy", "backtest")


def load_config_file(path: str | Path | None) -> dict[str, dict]:
    """Parse the config document; unknown sections are rejected."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}")
    return data


def resolve(section: dict, flags: dict, defaults: dict) -> dict:
    """Layer one section: start from defaults, apply the config file, then
    any flag explicitly provided (non-None)."""
    out = dict(defaults)
    for key, value in section.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}; expected one of {sorted(defaults)}")
        out[key] = value
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out
