"""INI config files with ``[arena]``, ``[reward]`` and ``[ppo]`` sections.

Every dataclass field of :class:`ArenaConfig`, :class:`RewardConfig` and
:class:`PPOConfig` is a valid key in its section; values are coerced to
the field's declared type. Missing keys keep their defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import typing
from dataclasses import dataclass, field
from pathlib import Path

from arena_rl.reward import PRESETS, RewardConfig
from arena_rl.sim import ArenaConfig, ConfigError
from arena_rl.trainer.ppo import PPOConfig

SECTIONS = {"arena": ArenaConfig, "reward": RewardConfig, "ppo": PPOConfig}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def validate(self) -> None:
        self.arena.validate()
        self.reward.validate()
        self.ppo.validate()

    def as_dict(self) -> dict:
        return {name: config_to_dict(getattr(self, name)) for name in SECTIONS}


def _coerce(section: str, key: str, raw: str, kind):
    where = f"{section}.{key}"
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(kind, type) and issubclass(kind, enum.Enum):
            return kind(raw.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {where}: {raw!r}") from None
    return raw


def config_to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = v.value if isinstance(v, enum.Enum) else v
    return out


def parse_section(section: str, items: dict, cls):
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    raw_items = dict(items)
    if cls is RewardConfig and "preset" in raw_items:
        preset = raw_items.pop("preset").strip()
        if preset not in PRESETS:
            raise ConfigError(f"invalid value for reward.preset: {preset!r}")
        kwargs["penalty_multiplier"] = PRESETS[preset]
    for key, raw in raw_items.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
        kwargs[key] = _coerce(section, key, raw, hints[key])
    try:
        cfg = cls(**kwargs)
        cfg.validate()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}: {exc}") from None
    return cfg


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive field names
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}".replace("\n", " ")) from None
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
    parts = {name: parse_section(name, parser[name] if parser.has_section(name) else {}, cls)
             for name, cls in SECTIONS.items()}
    return RunConfig(**parts)


def load(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return loads(text)


def dumps(cfg: RunConfig) -> str:
    lines = []
    for name, values in cfg.as_dict().items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {str(v).lower() if isinstance(v, bool) else v}" for k, v in values.items())
        lines.append("")
    return "\n".join(lines)
