"""Scenario configuration: TOML documents, named presets and validation.

A document has top-level scenario keys plus optional sections ``[phy]``,
``[mac]``, ``[channel]``, ``[noise]``, ``[dynamics]``, ``[controller]`` and
``[rwpm]``. Unknown keys are rejected. Omitted keys take the defaults below;
``duration``, ``seeds`` and ``n_stations`` default per scenario.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ChannelParams, FadingModel, SuccessModelParams, default_success_model
from .core import PhyConfig, PhyOverhead
from .filters import DynamicsParams
from .ftm import MeasurementNoiseModel
from .rate_control import POLICIES, ControllerParams
from .sim import SCENARIOS, MacParams, RunSetup, RwpmParams


class ConfigError(ValueError):
    """Invalid or unparsable scenario configuration."""


# scenario -> (seeds, n_stations); durations are computed by default_duration
_SCENARIO_DEFAULTS = {
    "EqualDistance": (10, tuple(range(1, 31))),
    "MovingStation": (15, (1,)),
    "RwpmField": (40, (10,)),
}


def default_duration(scenario: str, n_stations: int, velocity: float) -> float:
    if scenario == "EqualDistance":
        return 50.0 + 10.0 * n_stations
    if scenario == "MovingStation":
        return 50.0 / velocity if velocity > 0 else 50.0  # time to reach 50 m
    return 1000.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    scenario: str = "EqualDistance"
    n_stations: tuple = ()
    distance: float = 20.0
    velocity: float = 1.0
    duration: float | None = None  # None: scenario default, may depend on n_stations
    seeds: tuple = ()
    controllers: tuple = POLICIES
    ftm_period: float = 0.5
    interval: float = 1.0
    success_model: str = "default"  # "default" or a path to a fitted model JSON
    out_dir: str = "results"
    phy: PhyConfig = PhyConfig()
    mac: MacParams = MacParams()
    channel: ChannelParams = ChannelParams()
    fading: FadingModel = FadingModel()
    noise: MeasurementNoiseModel = MeasurementNoiseModel()
    controller: ControllerParams = field(default_factory=ControllerParams)
    rwpm: RwpmParams = RwpmParams()

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: must be one of {', '.join(SCENARIOS)}, got {self.scenario!r}")
        n_seeds, n_sta = _SCENARIO_DEFAULTS[self.scenario]
        if not self.seeds:
            object.__setattr__(self, "seeds", tuple(range(n_seeds)))
        if not self.n_stations:
            object.__setattr__(self, "n_stations", n_sta)
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "n_stations", tuple(self.n_stations))
        object.__setattr__(self, "controllers", tuple(self.controllers))
        checks = [
            (self.duration is None or self.duration > 0, "duration: must be > 0"),
            (all(isinstance(s, int) and s >= 0 for s in self.seeds), "seeds: must be non-negative integers"),
            (len(set(self.seeds)) == len(self.seeds), "seeds: must be distinct"),
            (all(isinstance(n, int) and n >= 1 for n in self.n_stations), "n_stations: must be integers >= 1"),
            (self.distance >= 0, "distance: must be >= 0"),
            (self.velocity >= 0, "velocity: must be >= 0"),
            (self.ftm_period > 0, "ftm_period: must be > 0"),
            (self.interval > 0, "interval: must be > 0"),
            (len(self.controllers) >= 1, "controllers: need at least one"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for c in self.controllers:
            if c not in POLICIES and not re.fullmatch(r"Fixed(1[01]|\d)", c):
                raise ConfigError(f"controllers: unknown policy {c!r}; expected one of {', '.join(POLICIES)}")

    def run_duration(self, n_stations: int) -> float:
        if self.duration is not None:
            return self.duration
        return default_duration(self.scenario, n_stations, self.velocity)

    def load_success_model(self) -> SuccessModelParams:
        if self.success_model == "default":
            return default_success_model()
        return SuccessModelParams.load(self.success_model)

    def run_setup(self, policy: str, n_stations: int, success_model: SuccessModelParams | None = None) -> RunSetup:
        return RunSetup(
            scenario=self.scenario, n_stations=n_stations, policy=policy,
            duration=self.run_duration(n_stations), distance=self.distance, velocity=self.velocity,
            rwpm=self.rwpm, phy=self.phy, mac=self.mac, channel=self.channel, fading=self.fading,
            noise=self.noise, ftm_period=self.ftm_period, interval=self.interval,
            controller_params=self.controller, success_model=success_model,
        )

    def to_dict(self) -> dict:
        """Plain nested dict in document form; ``config_from_dict`` inverts it."""
        phy = self.phy
        ctrl = dataclasses.asdict(self.controller)
        dyn = ctrl.pop("dynamics")
        out = {
            "name": self.name, "scenario": self.scenario, "n_stations": list(self.n_stations),
            "distance": self.distance, "velocity": self.velocity, "seeds": list(self.seeds),
            "controllers": list(self.controllers), "ftm_period": self.ftm_period,
            "interval": self.interval, "success_model": self.success_model, "out_dir": self.out_dir,
            "phy": {"channel_width": phy.channel_width, "guard_interval": phy.guard_interval,
                    "payload_size": phy.payload_size, "preamble_us": phy.overhead.preamble_us,
                    "mpdu_overhead_bytes": phy.overhead.mpdu_overhead_bytes},
            "mac": dataclasses.asdict(self.mac),
            "channel": {**dataclasses.asdict(self.channel), "fading": self.fading.kind, "nakagami_m": self.fading.m},
            "noise": dataclasses.asdict(self.noise),
            "dynamics": dyn,
            "controller": ctrl,
            "rwpm": dataclasses.asdict(self.rwpm),
        }
        if self.duration is not None:
            out["duration"] = self.duration
        return out

    def config_hash(self) -> str:
        """SHA-256 over the canonical document, excluding the output location."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# Parsing ---------------------------------------------------------------------

_TOP_KEYS = {"name": str, "scenario": str, "distance": float, "velocity": float, "duration": float,
             "ftm_period": float, "interval": float, "success_model": str, "out_dir": str}


def _scalar(path: str, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"{path}: expected {kind.__name__}, got {value!r}")


def _section(name: str, doc: dict, cls):
    """kwargs for dataclass ``cls`` from ``doc``, typed by each field's default."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = {f.name: f.default for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in doc.items():
        if key not in defaults or not isinstance(defaults[key], (int, float, str)):
            raise ConfigError(f"{name}.{key}: unknown key")
        kwargs[key] = _scalar(f"{name}.{key}", value, type(defaults[key]))
    return kwargs


def _build(path: str, cls, kwargs):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _int_list(path: str, value) -> tuple:
    if isinstance(value, int) and not isinstance(value, bool):
        return (value,)
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"{path}: must not be empty")
        return tuple(_scalar(f"{path}[{i}]", v, int) for i, v in enumerate(value))
    raise ConfigError(f"{path}: expected an integer or a list of integers")


def config_from_dict(doc: dict) -> ScenarioConfig:
    doc = dict(doc)
    kw = {}
    for key in list(doc):
        if key in _TOP_KEYS:
            kw[key] = _scalar(key, doc.pop(key), _TOP_KEYS[key])
    if "n_stations" in doc:
        kw["n_stations"] = _int_list("n_stations", doc.pop("n_stations"))
    if "seeds" in doc:
        seeds = doc.pop("seeds")
        # an integer means that many seeds starting at 0
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            if seeds < 1:
                raise ConfigError("seeds: need at least one seed")
            kw["seeds"] = tuple(range(seeds))
        else:
            kw["seeds"] = _int_list("seeds", seeds)
    if "controllers" in doc:
        ctrls = doc.pop("controllers")
        if not isinstance(ctrls, list) or not ctrls or not all(isinstance(c, str) for c in ctrls):
            raise ConfigError("controllers: expected a list of policy names")
        kw["controllers"] = tuple(ctrls)

    phy_doc = dict(doc.pop("phy", {}))
    overhead = {k: phy_doc.pop(k) for k in ("preamble_us", "mpdu_overhead_bytes") if k in phy_doc}
    phy = _section("phy", phy_doc, PhyConfig)
    if overhead:
        phy["overhead"] = _build("phy", PhyOverhead, _section("phy", overhead, PhyOverhead))
    kw["phy"] = _build("phy", PhyConfig, phy)
    kw["mac"] = _build("mac", MacParams, _section("mac", doc.pop("mac", {}), MacParams))

    ch = dict(doc.pop("channel", {}))
    fading = {}
    if "fading" in ch:
        fading["kind"] = _scalar("channel.fading", ch.pop("fading"), str)
    if "nakagami_m" in ch:
        fading["m"] = _scalar("channel.nakagami_m", ch.pop("nakagami_m"), float)
    kw["channel"] = _build("channel", ChannelParams, _section("channel", ch, ChannelParams))
    kw["fading"] = _build("channel.fading", FadingModel, fading)
    kw["noise"] = _build("noise", MeasurementNoiseModel, _section("noise", doc.pop("noise", {}), MeasurementNoiseModel))
    dyn = _build("dynamics", DynamicsParams, _section("dynamics", doc.pop("dynamics", {}), DynamicsParams))
    ctrl = _section("controller", doc.pop("controller", {}), ControllerParams)
    kw["controller"] = _build("controller", ControllerParams, {**ctrl, "dynamics": dyn})
    kw["rwpm"] = _build("rwpm", RwpmParams, _section("rwpm", doc.pop("rwpm", {}), RwpmParams))

    if doc:
        raise ConfigError(f"{sorted(doc)[0]}: unknown key")
    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a TOML scenario document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"parse error: {e}") from None
    return config_from_dict(doc)


# Presets ---------------------------------------------------------------------

_DESK = {"n_stations": [1, 5, 10], "duration": 60.0, "seeds": 10}

PRESETS: dict[str, dict] = {
    "paper/equal-distance-0m": {"scenario": "EqualDistance", "distance": 0.0},
    "paper/equal-distance-20m": {"scenario": "EqualDistance", "distance": 20.0},
    "paper/moving-station-1mps": {"scenario": "MovingStation", "velocity": 1.0},
    "paper/moving-station-2mps": {"scenario": "MovingStation", "velocity": 2.0},
    "paper/rwpm": {"scenario": "RwpmField"},
    "paper/rwpm-static": {"scenario": "RwpmField", "rwpm": {"max_speed": 0.0}},
    "paper/equal-distance-0m-desk": {"scenario": "EqualDistance", "distance": 0.0, **_DESK},
    "paper/equal-distance-20m-desk": {"scenario": "EqualDistance", "distance": 20.0, **_DESK},
    "paper/moving-station-1mps-desk": {"scenario": "MovingStation", "velocity": 1.0, "seeds": 5},
    "paper/moving-station-2mps-desk": {"scenario": "MovingStation", "velocity": 2.0, "seeds": 5},
    "paper/rwpm-desk": {"scenario": "RwpmField", "duration": 100.0, "seeds": 20},
    "paper/rwpm-static-desk": {"scenario": "RwpmField", "duration": 100.0, "seeds": 20,
                               "rwpm": {"max_speed": 0.0}},
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; see `ftmrate presets`")
    doc = json.loads(json.dumps(PRESETS[name]))
    doc.setdefault("name", name.replace("/", "-"))
    doc.setdefault("out_dir", f"results/{name.replace('/', '-')}")
    return config_from_dict(doc)


def load_config(ref: str) -> ScenarioConfig:
    """A preset name or a path to a TOML file."""
    if ref in PRESETS:
        return preset(ref)
    try:
        with open(ref, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{ref}: not a preset and not a readable file ({e.strerror})") from None
    return parse_config(text)
