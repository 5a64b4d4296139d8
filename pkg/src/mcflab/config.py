"""Line-based scenario configuration.

A configuration is a sequence of ``key = value`` lines. ``#`` starts a
comment, blank lines are ignored, and section keys are dotted
(``engine.cfl = 0.2``). Unknown or repeated keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError

SCENARIOS = ("oracle", "flow", "harnack", "diagnose", "rescale", "full-suite")
ORACLE_GEOMETRIES = ("sphere", "cylinder", "grim-reaper", "bowl", "paperclip")
GEOMETRIES = ORACLE_GEOMETRIES + ("perturbed", "profile")
SOURCES = ("analytic", "discrete", "engine")


@dataclass(frozen=True)
class EngineSection:
    cfl: float = 0.4
    resample_every: int = 50
    snapshot_every: int = 20
    max_steps: int = 200_000
    blowup_factor: float = 1e4


@dataclass(frozen=True)
class ChecksSection:
    harnack: bool = True
    integrated: bool = True
    pinching: bool = True
    diameter: bool = True
    conditions: bool = True
    tol_scale: float = 1.0
    harnack_tol: float = 1e-3
    integrated_tol: float = 1e-3
    pinching_tol: float = 1e-4
    pinching_budget: float = 0.0
    diameter_tol: float = 1e-3
    oracle_tol: float = 1e-6
    pairs: int = 50
    eps0: str = "auto"
    inject_q_drop: int = -1
    rescale_count: int = 5


@dataclass(frozen=True)
class OutputSection:
    dir: str = ""
    snapshots: bool = True
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description with defaults filled in.

    ``t_start``, ``resolution``, ``truncation`` and ``source`` default to
    ``None`` and are resolved per geometry by :meth:`resolved`.
    """

    t_end: float
    scenario: str = "full-suite"
    geometry: str = "sphere"
    d: int = 2
    r0: float = 1.0
    t_start: float | None = None
    ancient: bool = False
    resolution: int | None = None
    truncation: float | None = None
    amplitude: float = 0.1
    profile: str = ""
    seed: int = 0
    source: str | None = None
    frames: int = 41
    engine: EngineSection = field(default_factory=EngineSection)
    checks: ChecksSection = field(default_factory=ChecksSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def start_time(self) -> float:
        if self.t_start is not None:
            return self.t_start
        if self.geometry == "paperclip":
            return min(-1.0, self.t_end - 1.0)
        return -1.0 if self.ancient else 0.0

    @property
    def data_source(self) -> str:
        if self.source is not None:
            return self.source
        return "analytic" if self.geometry in ORACLE_GEOMETRIES else "engine"

    @property
    def eps0_policy(self):
        return "auto" if self.checks.eps0 == "auto" else float(self.checks.eps0)

    def tol(self, name: str) -> float:
        return getattr(self.checks, name) * self.checks.tol_scale

    def with_overrides(self, **kw) -> "ScenarioConfig":
        checks = kw.pop("checks", None)
        cfg = replace(self, **kw)
        if checks:
            cfg = replace(cfg, checks=replace(cfg.checks, **checks))
        cfg.validate()
        return cfg

    def validate(self):
        _validate(self)


_SECTIONS = {"engine": EngineSection, "checks": ChecksSection, "output": OutputSection}
_TOP = {f.name: f for f in fields(ScenarioConfig) if f.name not in _SECTIONS}


def _field_types(cls):
    hints = {}
    for f in fields(cls):
        hints[f.name] = f.type if isinstance(f.type, str) else f.type.__name__
    return hints


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_value(type_name: str, text: str):
    base = type_name.replace(" | None", "")
    if base == "bool":
        return _parse_bool(text)
    if base == "int":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
    if base == "float":
        value = float(text)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {text!r}")
        return value
    return text


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown or duplicate keys and invalid values; the
        message names the offending line(s).
    """
    top_types = _field_types(ScenarioConfig)
    section_types = {name: _field_types(cls) for name, cls in _SECTIONS.items()}
    seen: dict[str, int] = {}
    top: dict = {}
    sections: dict = {name: {} for name in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} on lines {seen[key]} and {lineno}")
        seen[key] = lineno
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS or name not in section_types[section]:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            type_name = section_types[section][name]
            target = sections[section]
        else:
            if key not in _TOP:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            name, type_name, target = key, top_types[key], top
        try:
            target[name] = _parse_value(type_name, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    if "t_end" not in top:
        raise ConfigError("missing required key 't_end'")
    cfg = ScenarioConfig(
        **top,
        engine=EngineSection(**sections["engine"]),
        checks=ChecksSection(**sections["checks"]),
        output=OutputSection(**sections["output"]),
    )
    cfg.validate()
    return cfg


def _validate(cfg: ScenarioConfig):
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}")
    if cfg.geometry not in GEOMETRIES:
        raise ConfigError(f"geometry must be one of {', '.join(GEOMETRIES)}")
    if cfg.source is not None and cfg.source not in SOURCES:
        raise ConfigError(f"source must be one of {', '.join(SOURCES)}")
    if cfg.data_source != "engine" and cfg.geometry not in ORACLE_GEOMETRIES:
        raise ConfigError(f"source {cfg.data_source!r} needs an exact-solution geometry")
    if cfg.geometry == "profile" and not cfg.profile:
        raise ConfigError("geometry 'profile' needs a profile file")
    if cfg.d < 1:
        raise ConfigError("d must be positive")
    if not cfg.r0 > 0:
        raise ConfigError("r0 must be positive")
    if cfg.resolution is not None and cfg.resolution < 16:
        raise ConfigError("resolution must be at least 16")
    if cfg.frames < 2:
        raise ConfigError("frames must be at least 2")
    if not cfg.t_end > cfg.start_time:
        raise ConfigError("t_end must exceed the start time")
    if cfg.ancient and cfg.t_end >= 0:
        raise ConfigError("ancient scenarios use negative times (t_end < 0)")
    e = cfg.engine
    if not 0 < e.cfl <= 1:
        raise ConfigError("cfl out of (0,1]")
    if e.resample_every < 0 or e.snapshot_every < 1 or e.max_steps < 1 or not e.blowup_factor > 1:
        raise ConfigError("engine controls out of range")
    c = cfg.checks
    for name in ("tol_scale", "harnack_tol", "integrated_tol", "pinching_tol", "diameter_tol", "oracle_tol"):
        if not getattr(c, name) > 0:
            raise ConfigError(f"checks.{name} must be positive")
    if c.pinching_budget < 0:
        raise ConfigError("checks.pinching_budget must be nonnegative")
    if c.pairs < 0 or c.rescale_count < 2:
        raise ConfigError("checks.pairs >= 0 and checks.rescale_count >= 2 are required")
    if c.eps0 != "auto":
        try:
            value = float(c.eps0)
        except ValueError:
            raise ConfigError("checks.eps0 must be 'auto' or a number") from None
        if not value >= 0:
            raise ConfigError("checks.eps0 must be nonnegative")
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
