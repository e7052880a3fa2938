"""Scenario configuration: dataclasses, YAML loading with field-path
validation, disturbances and the stress presets."""

from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass, field

import yaml

from .forecasting import ForestConfig
from .physics import BatteryParams, ExternalSupplyParams, LoadProfile, PvParams, WeatherParams
from .planning import PlannerConfig


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class Mode(enum.Enum):
    BASELINE = "BASELINE"
    PREDICTIVE = "PREDICTIVE"


class DisturbanceKind(enum.Enum):
    PV_OUTAGE = "PV_OUTAGE"
    LOAD_SPIKE = "LOAD_SPIKE"


@dataclass(frozen=True)
class Disturbance:
    kind: DisturbanceKind
    start_tick: int
    end_tick: int | None = None  # None: until the end of the run
    magnitude: float = 1.0

    def __post_init__(self):
        if self.end_tick is not None and self.end_tick < self.start_tick:
            raise ValueError("startTick: must not exceed endTick")
        if self.kind is DisturbanceKind.LOAD_SPIKE and not self.magnitude > 1:
            raise ValueError("magnitude: load spike multiplier must exceed 1")

    def active(self, tick: int) -> bool:
        return self.start_tick <= tick and (self.end_tick is None or tick <= self.end_tick)


def apply_disturbance(d: Disturbance | None, tick: int, pv_kw: float, load_kw: float) -> tuple[float, float]:
    if d is None or not d.active(tick):
        return pv_kw, load_kw
    if d.kind is DisturbanceKind.PV_OUTAGE:
        return 0.0, load_kw
    return pv_kw, d.magnitude * load_kw


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    ticks: int = 336
    mode: Mode = Mode.BASELINE
    weather: WeatherParams = field(default_factory=WeatherParams)
    pv: PvParams = field(default_factory=PvParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    load: LoadProfile = field(default_factory=LoadProfile)
    external: ExternalSupplyParams = field(default_factory=ExternalSupplyParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    forecaster: ForestConfig = field(default_factory=ForestConfig)
    disturbance: Disturbance | None = None

    def __post_init__(self):
        if self.ticks < 1:
            raise ValidationError("ticks", "must be positive")
        if self.planner.activation_tick >= self.ticks:
            raise ValidationError("planner.activationTick", "must be earlier than the run length")
        d = self.disturbance
        if d is not None and d.start_tick <= self.planner.activation_tick:
            raise ValidationError("disturbance.startTick", "disturbances start after planner activation")

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# Presets
# --------------------------------------------------------------------------

PRESETS = {
    "nominal": None,
    "pv-outage": Disturbance(DisturbanceKind.PV_OUTAGE, 200, None),
    "load-spike": Disturbance(DisturbanceKind.LOAD_SPIKE, 200, 260, 2.0),
}


def with_scenario(cfg: ScenarioConfig, name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}")
    return cfg.replace(disturbance=PRESETS[name])


# --------------------------------------------------------------------------
# YAML mapping
# --------------------------------------------------------------------------

SECTIONS = {
    "weather": WeatherParams,
    "pv": PvParams,
    "battery": BatteryParams,
    "load": LoadProfile,
    "external": ExternalSupplyParams,
    "planner": PlannerConfig,
    "forecaster": ForestConfig,
}


def snake(name: str) -> str:
    return re.sub(r"(?<!^)([A-Z])", r"_\1", name).lower()


def camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(p[:1].upper() + p[1:] for p in rest)


def _build(cls, raw, path: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ValidationError(path, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        attr = snake(key)
        if attr not in names:
            raise ValidationError(f"{path}.{key}", "unknown key")
        if attr == "schedule":
            value = tuple(float(v) for v in value)
        kwargs[attr] = value
    try:
        return cls(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        head, _, rest = msg.partition(": ")
        if rest and re.fullmatch(r"[A-Za-z0-9]+", head):
            raise ValidationError(f"{path}.{head}", rest) from exc
        raise ValidationError(path, msg) from exc
    except TypeError as exc:
        raise ValidationError(path, str(exc)) from exc


def _enum(cls, value, path):
    try:
        return cls(str(value).upper().replace("-", "_"))
    except ValueError:
        raise ValidationError(path, f"expected one of {[m.value for m in cls]}") from None


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "expected a mapping")
    known = {"seed", "ticks", "mode", "disturbance", *SECTIONS}
    for key in raw:
        if key not in known:
            raise ValidationError(key, "unknown key")
    kwargs = {}
    if "seed" in raw:
        kwargs["seed"] = int(raw["seed"])
    if "ticks" in raw:
        kwargs["ticks"] = int(raw["ticks"])
    if "mode" in raw:
        kwargs["mode"] = _enum(Mode, raw["mode"], "mode")
    for name, cls in SECTIONS.items():
        if name in raw:
            kwargs[name] = _build(cls, raw[name], name)
    d = raw.get("disturbance")
    if d is not None:
        if not isinstance(d, dict) or "kind" not in d:
            raise ValidationError("disturbance.kind", "required")
        d = dict(d)
        kind = _enum(DisturbanceKind, d.pop("kind"), "disturbance.kind")
        kwargs["disturbance"] = _build_disturbance(kind, d)
    try:
        return ScenarioConfig(**kwargs)
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError("<root>", str(exc)) from exc


def _build_disturbance(kind: DisturbanceKind, raw: dict) -> Disturbance:
    allowed = {"startTick", "endTick", "magnitude"}
    for key in raw:
        if key not in allowed:
            raise ValidationError(f"disturbance.{key}", "unknown key")
    if "startTick" not in raw:
        raise ValidationError("disturbance.startTick", "required")
    try:
        return Disturbance(kind, int(raw["startTick"]),
                           None if raw.get("endTick") is None else int(raw["endTick"]),
                           float(raw.get("magnitude", 1.0)))
    except ValueError as exc:
        head, _, rest = str(exc).partition(": ")
        raise ValidationError(f"disturbance.{head}", rest or str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_dict(raw or {})


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved config with camelCase keys; inverse of ``config_from_dict``."""
    out: dict = {"seed": cfg.seed, "ticks": cfg.ticks, "mode": cfg.mode.value}
    for name in SECTIONS:
        section = getattr(cfg, name)
        out[name] = {
            camel(f.name): (list(v) if isinstance(v := getattr(section, f.name), tuple) else v)
            for f in dataclasses.fields(section)
        }
    d = cfg.disturbance
    if d is not None:
        out["disturbance"] = {"kind": d.kind.value, "startTick": d.start_tick, "endTick": d.end_tick,
                              "magnitude": d.magnitude}
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def nominal_config_path() -> str:
    """Path of the bundled nominal-scenario YAML file."""
    import os

    return os.path.join(os.path.dirname(__file__), "configs", "nominal.yaml")
