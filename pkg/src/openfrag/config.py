"""Experiment configuration: flat ``key = value`` files with one section per scenario."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    n_sites: int = 4
    channel: str = "dephasing"
    gamma: float = 0.3
    n_steps: int = 200
    n_realizations: int = 1
    seed: int = 0
    cut: int = 0  # 0 means the middle bond
    initial_state: str = "all_plus"
    output_dir: str = "out"
    sizes: tuple[int, ...] = field(default_factory=tuple)

    @property
    def middle_cut(self) -> int:
        return self.cut or self.n_sites // 2

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sizes"] = list(self.sizes)
        return d


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("tuple"):
            return tuple(int(x) for x in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(configs: ExperimentConfig | list[ExperimentConfig]) -> str:
    if isinstance(configs, ExperimentConfig):
        configs = [configs]
    parser = configparser.ConfigParser(interpolation=None)
    for cfg in configs:
        parser[cfg.scenario] = {
            k: _format(v) for k, v in dataclasses.asdict(cfg).items() if k != "scenario"
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse(text: str, defaults: dict[str, ExperimentConfig] | None = None) -> dict[str, ExperimentConfig]:
    """Parse config text into one :class:`ExperimentConfig` per section.

    Keys missing from a section fall back to ``defaults[section]`` when given.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    out = {}
    for section in parser.sections():
        base = (defaults or {}).get(section) or ExperimentConfig(scenario=section)
        values = {}
        for key, raw in parser[section].items():
            if key not in _FIELDS or key == "scenario":
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _convert(key, raw)
        out[section] = base.replace(**values)
    return out


def load(path: str | Path, defaults: dict[str, ExperimentConfig] | None = None) -> dict[str, ExperimentConfig]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(text, defaults)
