"""TOML configuration with strict key checking."""
from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ConfigError", "load_toml", "check_keys", "section", "recipe_names", "load_recipe", "CONFIG_VERSION"]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Malformed or incomplete configuration."""


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def check_keys(cfg: dict, allowed, where: str, required=()) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing required field(s) in [{where}]: {', '.join(missing)}")
    return cfg


def section(cfg: dict, name: str, allowed, required=(), optional: bool = False) -> dict:
    if name not in cfg:
        if optional:
            return {}
        raise ConfigError(f"missing required section [{name}]")
    return check_keys(cfg[name], allowed, name, required)


def check_version(cfg: dict) -> None:
    v = cfg.get("version", CONFIG_VERSION)
    if v != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {v!r} (expected {CONFIG_VERSION})")


def _recipe_dir():
    return resources.files("pikernel") / "recipes"


def recipe_names() -> list[str]:
    return sorted(p.name[:-5] for p in _recipe_dir().iterdir() if p.name.endswith(".toml"))


def load_recipe(name: str) -> dict:
    f = _recipe_dir() / f"{name}.toml"
    if not f.is_file():
        raise ConfigError(f"unknown recipe {name!r}; available: {', '.join(recipe_names())}")
    return tomllib.loads(f.read_text())
