"""Plain-text configuration parsing.

All configuration files are ``key = value`` lines; ``#`` starts a comment.
Sampling rules are written ``value`` (fixed), ``lo:hi`` (uniform) or
``lo:hi:log`` (log-uniform); grid axes are comma-separated value lists.
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

from .autoencoder import SamplingRule
from .channel import LinkParams, NlinCoefficients

DEFAULT_LINK_RESOURCE = "link_10x100km.cfg"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{origin}:{lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    return parse_kv_text(path.read_text(encoding="utf-8"), origin=str(path))


def _convert(key: str, raw: str, kind, origin: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(float(raw)) if float(raw) == int(float(raw)) else int(raw)
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"{origin}: key {key!r}: cannot parse {raw!r} as {kind.__name__}"
        ) from exc


def get(cfg: dict, key: str, kind=str, default=None, required=False, origin="<config>"):
    if key not in cfg:
        if required:
            raise ConfigError(f"{origin}: missing required key {key!r}")
        return default
    return _convert(key, cfg[key], kind, origin)


def parse_rule(raw: str, key: str = "value", origin: str = "<config>") -> SamplingRule:
    """``v`` -> fixed, ``lo:hi`` -> uniform, ``lo:hi:log`` -> log-uniform."""
    parts = [p.strip() for p in raw.split(":")]
    try:
        if len(parts) == 1:
            return SamplingRule.fixed(float(parts[0]))
        if len(parts) == 2:
            return SamplingRule.uniform(float(parts[0]), float(parts[1]))
        if len(parts) == 3 and parts[2].lower() == "log":
            return SamplingRule.log_uniform(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{origin}: key {key!r}: bad sampling rule {raw!r}: {exc}") from exc
    raise ConfigError(f"{origin}: key {key!r}: bad sampling rule {raw!r}")


def parse_float_list(raw: str, key: str = "value", origin: str = "<config>") -> list[float]:
    try:
        values = [float(p) for p in raw.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{origin}: key {key!r}: bad value list {raw!r}") from exc
    if not values:
        raise ConfigError(f"{origin}: key {key!r}: empty value list")
    return values


def default_link_path() -> Path:
    return Path(importlib.resources.files("gcslab").joinpath("data", DEFAULT_LINK_RESOURCE))


def load_link_config(path=None) -> tuple[LinkParams, NlinCoefficients]:
    """Link constants plus NLIN kappas from a key=value file.

    With no path, the bundled default link file is used.  Any LinkParams
    field may be overridden; kappa0..kappa2 are required.
    """
    path = Path(path) if path is not None else default_link_path()
    cfg = parse_kv_file(path)
    origin = str(path)
    kwargs = {}
    for field_name, field_def in LinkParams.__dataclass_fields__.items():
        if field_name in cfg:
            kind = int if field_def.type in ("int",) or isinstance(field_def.default, int) else float
            kwargs[field_name] = _convert(field_name, cfg[field_name], kind, origin)
    try:
        link = LinkParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    try:
        coeffs = NlinCoefficients(
            kappa0=get(cfg, "kappa0", float, required=True, origin=origin),
            kappa1=get(cfg, "kappa1", float, required=True, origin=origin),
            kappa2=get(cfg, "kappa2", float, required=True, origin=origin),
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    known = set(LinkParams.__dataclass_fields__) | {"kappa0", "kappa1", "kappa2"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"{origin}: unknown keys {sorted(unknown)}")
    return link, coeffs
