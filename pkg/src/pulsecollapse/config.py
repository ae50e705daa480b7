"""Scenario configuration: YAML schema, strict validation, typed access.

Config files are nested key-value YAML. Validation is strict in both
directions: a missing required key and an unknown key are both errors, and
the offending key is named in the message (unknown keys are likelier typos
than extensions).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any, Dict

import yaml

from .errors import ConfigError

__all__ = ["ScenarioConfig", "SCENARIO_NAMES", "load_config", "parse_config"]

SCENARIO_NAMES = (
    "interaction",
    "unresolvable_observation",
    "turn_off",
    "disengage",
    "pulse_drift",
    "fade_in",
)

_BASE_SCHEMA: Dict[str, Dict[str, type]] = {
    "scenario": {
        "name": str,
        "seed": int,
        "dt": float,
        "trials": int,
        "guard": bool,
        "tail_steps": int,
    },
    "grid": {"n_points": int, "spacing": float, "origin": float},
    "debug": {
        "bias_site_selection": bool,
        "tamper_phantom": bool,
        "intra_ready_transfer": bool,
    },
}

_ENVELOPE = {"kind": str, "t_start": float, "t_end": float, "fraction": float}
_FORMATION = {
    "mode": str,
    "target_sigma": float,
    "tau": float,
    "neighbor_radius": int,
    "settle_steps": int,
}
_TWO_SOURCE = {"amplitude1": float, "amplitude2": float}
_TWO_PULSES = {"center1": float, "sigma1": float, "center2": float, "sigma2": float}

_SCENARIO_SCHEMAS: Dict[str, Dict[str, Dict[str, type]]] = {
    "interaction": {
        "envelope": _ENVELOPE,
        "source": {"amplitude": float},
        "pulses": {
            "conscious_center": float,
            "conscious_sigma": float,
            "ready_center": float,
            "ready_sigma": float,
        },
        "formation": _FORMATION,
    },
    "unresolvable_observation": {
        "envelope": _ENVELOPE,
        "source": _TWO_SOURCE,
        "pulses": _TWO_PULSES,
        "variant": {"arrangement": str},
        "formation": _FORMATION,
    },
    "turn_off": {
        "envelope": _ENVELOPE,
        "source": _TWO_SOURCE,
        "pulses": _TWO_PULSES,
        "variant": {"arrangement": str},
        "formation": _FORMATION,
        "turn_off": {"t_off": float},
    },
    "disengage": {
        "envelope": _ENVELOPE,
        "source": _TWO_SOURCE,
        "pulses": _TWO_PULSES,
        "variant": {"arrangement": str},
        "formation": _FORMATION,
        "disengage": {"t_dis": float, "hold_steps": int},
    },
    "pulse_drift": {
        "pulses": {"center": float, "sigma": float},
        "drift": {
            "velocity": float,
            "shed_rate": float,
            "duration": float,
            "shadow": bool,
        },
    },
    "fade_in": {
        "envelope": _ENVELOPE,
        "source": {"amplitude": float},
        "pulses": {
            "conscious_center": float,
            "conscious_sigma": float,
            "ready_center": float,
            "ready_sigma": float,
        },
        "formation": _FORMATION,
    },
}

_REQUIRED_SECTIONS = {
    "interaction": ("scenario", "grid", "envelope", "source", "pulses", "formation"),
    "unresolvable_observation": (
        "scenario",
        "grid",
        "envelope",
        "source",
        "pulses",
        "formation",
    ),
    "turn_off": ("scenario", "grid", "envelope", "source", "pulses", "formation", "turn_off"),
    "disengage": ("scenario", "grid", "envelope", "source", "pulses", "formation", "disengage"),
    "pulse_drift": ("scenario", "grid", "pulses", "drift"),
    "fade_in": ("scenario", "grid", "envelope", "source", "pulses", "formation"),
}

_REQUIRED_KEYS = {
    "scenario": ("name", "seed", "dt"),
    "grid": ("n_points", "spacing"),
    "envelope": ("kind", "t_start", "t_end"),
    "formation": ("mode", "target_sigma"),
    "turn_off": ("t_off",),
    "disengage": ("t_dis",),
    "drift": ("velocity", "duration"),
}

_DEFAULTS = {
    ("scenario", "trials"): 100_000,
    ("scenario", "guard"): True,
    ("scenario", "tail_steps"): 20,
    ("grid", "origin"): 0.0,
    ("envelope", "fraction"): 1.0,
    ("formation", "tau"): 0.01,
    ("formation", "neighbor_radius"): 1,
    ("formation", "settle_steps"): 150,
    ("variant", "arrangement"): "overlap",
    ("disengage", "hold_steps"): 50,
    ("drift", "shed_rate"): 0.02,
    ("drift", "shadow"): True,
    ("debug", "bias_site_selection"): False,
    ("debug", "tamper_phantom"): False,
    ("debug", "intra_ready_transfer"): False,
}


def _coerce(section: str, key: str, want: type, value: Any):
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    if want is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("on", "off"):
            return value.lower() == "on"
        raise ConfigError(f"{section}.{key} must be a boolean or on/off, got {value!r}")
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string, got {value!r}")
        return value
    raise ConfigError(f"unsupported schema type for {section}.{key}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario configuration.

    ``data`` holds the fully defaulted nested mapping; dotted ``get`` is the
    accessor runners use. ``raw`` echoes the pre-default input for the run
    manifest.
    """

    name: str
    data: Dict[str, Dict[str, Any]]
    raw: Dict[str, Any]

    def get(self, dotted: str, default=None):
        section, _, key = dotted.partition(".")
        if not key:
            return self.data.get(section, default)
        sec = self.data.get(section)
        if sec is None:
            return default
        return sec.get(key, default)

    @property
    def seed(self) -> int:
        return self.data["scenario"]["seed"]

    @property
    def dt(self) -> float:
        return self.data["scenario"]["dt"]

    @property
    def trials(self) -> int:
        return self.data["scenario"]["trials"]

    @property
    def guard(self) -> bool:
        return self.data["scenario"]["guard"]

    def with_overrides(self, **scalar_overrides) -> "ScenarioConfig":
        """New config with scenario/formation scalars replaced.

        Recognized names: seed, trials, guard, formation_mode.
        """
        data = copy.deepcopy(self.data)
        for name, value in scalar_overrides.items():
            if value is None:
                continue
            if name == "seed":
                data["scenario"]["seed"] = int(value)
            elif name == "trials":
                data["scenario"]["trials"] = int(value)
            elif name == "guard":
                data["scenario"]["guard"] = _coerce("scenario", "guard", bool, value)
            elif name == "formation_mode":
                if "formation" not in data:
                    raise ConfigError(
                        f"scenario {self.name!r} takes no formation settings"
                    )
                if value not in ("instant", "staged"):
                    raise ConfigError(f"formation mode must be instant or staged, got {value!r}")
                data["formation"]["mode"] = value
            else:
                raise ConfigError(f"unknown override {name!r}")
        return ScenarioConfig(name=self.name, data=data, raw=self.raw)


def parse_config(mapping: Dict[str, Any]) -> ScenarioConfig:
    """Validate a nested mapping against the scenario schema."""
    if not isinstance(mapping, dict):
        raise ConfigError("config root must be a mapping of sections")
    scenario_sec = mapping.get("scenario")
    if not isinstance(scenario_sec, dict) or "name" not in scenario_sec:
        raise ConfigError("config must contain scenario.name")
    name = scenario_sec["name"]
    if name not in SCENARIO_NAMES:
        raise ConfigError(
            f"scenario.name must be one of {', '.join(SCENARIO_NAMES)}; got {name!r}"
        )

    schema = dict(_BASE_SCHEMA)
    schema.update(_SCENARIO_SCHEMAS[name])
    if name in ("unresolvable_observation", "turn_off", "disengage"):
        schema["variant"] = {"arrangement": str}

    for section in mapping:
        if section not in schema:
            raise ConfigError(f"unknown config section {section!r} for scenario {name!r}")
        if not isinstance(mapping[section], dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key in mapping[section]:
            if key not in schema[section]:
                raise ConfigError(f"unknown config key {section}.{key}")

    for section in _REQUIRED_SECTIONS[name]:
        if section not in mapping:
            raise ConfigError(f"missing required config section {section!r}")
        for key in _REQUIRED_KEYS.get(section, ()):
            if key not in mapping[section]:
                raise ConfigError(f"missing required config key {section}.{key}")

    data: Dict[str, Dict[str, Any]] = {}
    for section, keys in schema.items():
        src = mapping.get(section, {})
        out = {}
        for key, want in keys.items():
            if key in src:
                out[key] = _coerce(section, key, want, src[key])
            elif (section, key) in _DEFAULTS:
                out[key] = _DEFAULTS[(section, key)]
        data[section] = out

    # source and pulses carry no defaults; every schema key must be present
    for section in ("source", "pulses"):
        for key in schema.get(section, ()):
            if key not in data[section]:
                raise ConfigError(f"missing required config key {section}.{key}")

    _check_values(name, data)
    return ScenarioConfig(name=name, data=data, raw=copy.deepcopy(mapping))


def _check_values(name: str, data: Dict[str, Dict[str, Any]]) -> None:
    sc = data["scenario"]
    if sc["dt"] <= 0:
        raise ConfigError(f"scenario.dt must be positive, got {sc['dt']}")
    if sc["trials"] < 1:
        raise ConfigError(f"scenario.trials must be >= 1, got {sc['trials']}")
    if sc["seed"] < 0:
        raise ConfigError(f"scenario.seed must be nonnegative, got {sc['seed']}")
    grid = data["grid"]
    if grid["n_points"] < 8:
        raise ConfigError(f"grid.n_points must be >= 8, got {grid['n_points']}")
    if grid["spacing"] <= 0:
        raise ConfigError(f"grid.spacing must be positive, got {grid['spacing']}")
    env = data.get("envelope")
    if env:
        if env["kind"] not in ("trig", "linear"):
            raise ConfigError(f"envelope.kind must be trig or linear, got {env['kind']!r}")
        if env["t_end"] <= env["t_start"]:
            raise ConfigError("envelope.t_end must exceed envelope.t_start")
        if not 0.0 < env["fraction"] <= 1.0:
            raise ConfigError(f"envelope.fraction must be in (0, 1], got {env['fraction']}")
        if sc["dt"] > (env["t_end"] - env["t_start"]) / 100.0:
            raise ConfigError(
                "scenario.dt must be at most 1/100 of the envelope window "
                f"({(env['t_end'] - env['t_start']) / 100.0})"
            )
    form = data.get("formation")
    if form:
        if form["mode"] not in ("instant", "staged"):
            raise ConfigError(
                f"formation.mode must be instant or staged, got {form['mode']!r}"
            )
        if form["mode"] == "staged" and form["tau"] <= 0:
            raise ConfigError("formation.tau must be positive for staged mode")
    var = data.get("variant")
    if var and var.get("arrangement") not in ("overlap", "disjoint", "single_state"):
        raise ConfigError(
            "variant.arrangement must be overlap, disjoint, or single_state; "
            f"got {var.get('arrangement')!r}"
        )
    if name == "fade_in" and data["formation"]["mode"] != "staged":
        raise ConfigError("fade_in requires formation.mode = staged")
    if name == "turn_off" and env:
        if data["turn_off"]["t_off"] <= env["t_end"]:
            raise ConfigError("turn_off.t_off must come after the envelope window")
    if name == "disengage" and env:
        if data["disengage"]["t_dis"] <= env["t_end"]:
            raise ConfigError("disengage.t_dis must come after the envelope window")
    if name == "pulse_drift":
        dr = data["drift"]
        if dr["duration"] <= 0:
            raise ConfigError(f"drift.duration must be positive, got {dr['duration']}")
        if dr["shed_rate"] < 0:
            raise ConfigError(f"drift.shed_rate must be nonnegative, got {dr['shed_rate']}")


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            mapping = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    if mapping is None:
        raise ConfigError(f"config file {path} is empty")
    return parse_config(mapping)
