"""Flat ``key = value`` configuration files.

Keys are the benchmark parameter names (mu, sigma, r1, r2, alpha, beta, K1, kappa1, K2,
kappa2, a, b) plus an optional ``pi_scale``.  ``#`` starts a comment.
"""
from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from .diffusion import GameConfig, InvalidParameterError, check_integrability

REQUIRED_KEYS = ("mu", "sigma", "r1", "r2", "alpha", "beta", "K1", "kappa1", "K2", "kappa2", "a", "b")
OPTIONAL_KEYS = ("pi_scale",)


class ConfigError(ValueError):
    def __init__(self, msg, source=None, line=None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)
        self.source = source
        self.line = line


def shipped_configs() -> list[str]:
    root = resources.files("impulsegame") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def parse_config_text(text: str, source: str = "<string>") -> dict:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", source, lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigError(f"unknown key {key!r}", source, lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", source, lineno)
        try:
            num = float(val)
        except ValueError:
            raise ConfigError(f"value of {key!r} is not a number: {val!r}", source, lineno) from None
        if not math.isfinite(num):
            raise ConfigError(f"value of {key!r} is not finite", source, lineno)
        values[key] = num
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(missing)}", source)
    return values


def config_from_values(values: dict, allow_unchecked: bool = False, source: str = "<dict>") -> GameConfig:
    try:
        cfg = GameConfig.from_dict(values)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), source) from exc
    for name in ("a", "b", "beta", "pi_scale"):
        if name in values and not values[name] > 0:
            raise ConfigError(f"{name} must be positive, got {values[name]}", source)
    if not allow_unchecked:
        chk = check_integrability(cfg)
        if not chk.ok:
            raise ConfigError(
                f"integrability fails (firm margin {chk.firm_margin:.6g}, "
                f"government margin {chk.gov_margin:.6g}); pass allow_unchecked to override",
                source)
    return cfg


def load_config(path_or_name, allow_unchecked: bool = False) -> GameConfig:
    """Read a config file, or a shipped config by name (e.g. ``"table1"``)."""
    p = Path(path_or_name)
    if p.is_file():
        text, source = p.read_text(), str(p)
    elif str(path_or_name) in shipped_configs():
        res = resources.files("impulsegame") / "configs" / f"{path_or_name}.cfg"
        text, source = res.read_text(), str(path_or_name)
    else:
        raise ConfigError(f"no such config file or shipped config: {path_or_name}")
    return config_from_values(parse_config_text(text, source), allow_unchecked, source)


def dump_config(config: GameConfig) -> str:
    d = config.to_dict()
    if d.get("pi_scale") == 1.0:
        del d["pi_scale"]
    return "".join(f"{k} = {v!r}\n" for k, v in d.items())


__all__ = ["ConfigError", "REQUIRED_KEYS", "load_config", "parse_config_text",
           "config_from_values", "dump_config", "shipped_configs"]
