"""Scenario and sweep configuration, and the flat ``key = value`` file format.

Every key defaults to the evaluation setup of the original study (2000 nodes
on 5 x 5 km, 100 events, 2 h with 1 h warm-up, and so on). Any key can be
overridden through the environment as ``VUE_`` + the key upper-cased with
dots replaced by underscores, e.g. ``VUE_MOBILITY_MODEL=nc``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path

from vue.connectivity import RadioConfig
from vue.crypto import GROUPS
from vue.mobility import MODELS, Field, MobilityConfig

ENV_PREFIX = "VUE_"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 7200.0
    warmup: float = 3600.0
    dt: float = 1.0
    field: Field = dc_field(default_factory=Field)
    node_count: int = 2000
    event_count: int = 100
    event_radius_min: float = 25.0
    event_radius_max: float = 250.0
    negotiation_interval_min: float = 900.0
    negotiation_interval_max: float = 1800.0
    hop_limit: int = 1
    token_validity: float = 300.0
    malicious_ratio: float = 0.0
    mobility: MobilityConfig = dc_field(default_factory=MobilityConfig)
    radio: RadioConfig = dc_field(default_factory=RadioConfig)
    rp_count: int = 16
    crypto_mode: str = "model"
    crypto_group: str = "modp2048"
    seed: int = 0

    def __post_init__(self):
        checks = [
            ("sim.duration_s", self.duration > 0, "must be positive"),
            ("sim.warmup_s", 0 <= self.warmup < self.duration, "warmup must be >= 0 and < sim.duration_s"),
            ("sim.dt_s", self.dt > 0, "must be positive"),
            ("field.nodes", self.node_count >= 1, "must be >= 1"),
            ("events.count", self.event_count >= 0, "must be >= 0"),
            ("events.radius_min_m", 0 < self.event_radius_min <= self.event_radius_max,
             "need 0 < events.radius_min_m <= events.radius_max_m"),
            ("negotiation.interval_min_s", 0 < self.negotiation_interval_min <= self.negotiation_interval_max,
             "need 0 < interval_min <= interval_max"),
            ("negotiation.hop_limit", self.hop_limit >= 1, "must be >= 1"),
            ("negotiation.token_validity_s", self.token_validity > 0, "must be positive"),
            ("adversary.malicious_ratio", 0.0 <= self.malicious_ratio <= 1.0, "must lie in [0, 1]"),
            ("protocol.rp_count", self.rp_count >= 1, "must be >= 1"),
            ("crypto.mode", self.crypto_mode in ("model", "real"), "must be 'model' or 'real'"),
            ("crypto.group", self.crypto_group in GROUPS, f"must be one of {sorted(GROUPS)}"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig = dc_field(default_factory=ScenarioConfig)
    models: tuple[str, ...] = MODELS
    hop_limits: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    malicious_ratios: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(9))
    repetitions: int = 10

    def __post_init__(self):
        if not self.models:
            raise ConfigError("sweep.models", "must not be empty")
        for m in self.models:
            if m not in MODELS:
                raise ConfigError("sweep.models", f"unknown model {m!r}")
        if not self.hop_limits or min(self.hop_limits) < 1:
            raise ConfigError("sweep.hop_limits", "must be a non-empty list of integers >= 1")
        if not self.malicious_ratios or not all(0 <= r <= 1 for r in self.malicious_ratios):
            raise ConfigError("sweep.malicious_ratios", "must be a non-empty list in [0, 1]")
        if self.repetitions < 1:
            raise ConfigError("sweep.repetitions", "must be >= 1")


# ---------------------------------------------------------------------------
# Flat key table: key -> (section, attribute, kind)
# ---------------------------------------------------------------------------

_KEYS = {
    "sim.duration_s": (None, "duration", float),
    "sim.warmup_s": (None, "warmup", float),
    "sim.dt_s": (None, "dt", float),
    "sim.seed": (None, "seed", int),
    "field.width_m": ("field", "width", float),
    "field.height_m": ("field", "height", float),
    "field.nodes": (None, "node_count", int),
    "events.count": (None, "event_count", int),
    "events.radius_min_m": (None, "event_radius_min", float),
    "events.radius_max_m": (None, "event_radius_max", float),
    "negotiation.interval_min_s": (None, "negotiation_interval_min", float),
    "negotiation.interval_max_s": (None, "negotiation_interval_max", float),
    "negotiation.hop_limit": (None, "hop_limit", int),
    "negotiation.token_validity_s": (None, "token_validity", float),
    "adversary.malicious_ratio": (None, "malicious_ratio", float),
    "mobility.model": ("mobility", "model", str),
    "mobility.speed_min_mps": ("mobility", "speed_min", float),
    "mobility.speed_max_mps": ("mobility", "speed_max", float),
    "mobility.pause_max_s": ("mobility", "pause_max", "auto_float"),
    "mobility.group_size_mean": ("mobility", "group_mean", float),
    "mobility.group_size_var": ("mobility", "group_var", float),
    "mobility.group_radius_m": ("mobility", "group_radius", float),
    "mobility.roaming_radius_m": ("mobility", "roaming_radius", float),
    "radio.mode": ("radio", "mode", str),
    "radio.range_m": ("radio", "range", float),
    "radio.tx_power_dbm": ("radio", "tx_power", float),
    "radio.path_loss_exponent": ("radio", "path_loss_exponent", float),
    "radio.shadowing_sigma_db": ("radio", "shadowing_sigma", float),
    "radio.sensitivity_dbm": ("radio", "sensitivity", float),
    "radio.reference_loss_db": ("radio", "reference_loss_db", float),
    "protocol.rp_count": (None, "rp_count", int),
    "crypto.mode": (None, "crypto_mode", str),
    "crypto.group": (None, "crypto_group", str),
}

_SWEEP_KEYS = {
    "sweep.models": ("models", str),
    "sweep.hop_limits": ("hop_limits", int),
    "sweep.malicious_ratios": ("malicious_ratios", float),
    "sweep.repetitions": ("repetitions", "scalar_int"),
}

SCENARIO_KEYS = tuple(_KEYS)
ALL_KEYS = SCENARIO_KEYS + tuple(_SWEEP_KEYS)


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


def _parse_scalar(key: str, kind, text: str):
    text = text.strip()
    try:
        if kind == "auto_float":
            return None if text.lower() == "auto" else float(text)
        if kind is int or kind == "scalar_int":
            if text.lstrip("+-").isdigit():
                return int(text)
            f = float(text)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if kind is float:
            return float(text)
        if not text:
            raise ValueError
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_format(v) for v in value)
    return str(value)


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Split ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = value
    return out


def env_overrides(environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    return {k: environ[env_name(k)] for k in ALL_KEYS if env_name(k) in environ}


def build_scenario(values: dict[str, str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    base = base or ScenarioConfig()
    top, nested = {}, {"field": {}, "mobility": {}, "radio": {}}
    for key, raw in values.items():
        if key not in _KEYS:
            continue
        section, attr, kind = _KEYS[key]
        value = _parse_scalar(key, kind, raw)
        (top if section is None else nested[section])[attr] = value
    parts = {}
    for section, default_key in (("field", "field.width_m"), ("mobility", "mobility.model"), ("radio", "radio.mode")):
        try:
            parts[section] = replace(getattr(base, section), **nested[section])
        except ValueError as exc:
            key = next((k for k in values if k.startswith(section + ".")), default_key)
            raise ConfigError(key, str(exc)) from None
    return replace(base, **parts, **top)


def build_sweep(values: dict[str, str], base: ScenarioConfig | None = None) -> SweepSpec:
    scenario = build_scenario(values, base)
    kwargs = {}
    for key, (attr, kind) in _SWEEP_KEYS.items():
        if key not in values:
            continue
        if kind == "scalar_int":
            kwargs[attr] = _parse_scalar(key, int, values[key])
        else:
            items = [s for s in values[key].split(",") if s.strip()]
            kwargs[attr] = tuple(_parse_scalar(key, kind, s) for s in items)
    return SweepSpec(base=scenario, **kwargs)


def load_values(path=None, environ=None) -> dict[str, str]:
    values = {}
    if path is not None:
        p = Path(path)
        values.update(parse_text(p.read_text(encoding="utf-8"), str(p)))
    values.update(env_overrides(environ))
    return values


def load_scenario(path=None, environ=None) -> ScenarioConfig:
    return build_scenario(load_values(path, environ))


def load_sweep(path=None, environ=None) -> SweepSpec:
    return build_sweep(load_values(path, environ))


def scenario_values(cfg: ScenarioConfig) -> dict[str, str]:
    out = {}
    for key, (section, attr, _kind) in _KEYS.items():
        obj = cfg if section is None else getattr(cfg, section)
        out[key] = _format(getattr(obj, attr))
    return out


def dump_scenario(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in scenario_values(cfg).items())


def dump_sweep(spec: SweepSpec) -> str:
    text = dump_scenario(spec.base)
    for key, (attr, _kind) in _SWEEP_KEYS.items():
        text += f"{key} = {_format(getattr(spec, attr))}\n"
    return text

