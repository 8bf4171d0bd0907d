"""Scenario configuration: INI-style sections, strict keys, lossless round trip.

Grammar (``configparser`` INI)::

    [site]        SiteConfig fields (counts, bandwidths in b/s, fiber meters)
    [transceiver] turn_on_delay, turn_off_delay (durations), power_10g, power_40g, power_off (W)
    [switch]      queue_capacity, high_watermark, low_watermark, holddown, control_ttl,
                  clock_hz, pipeline_cycles, downlink_assist, assist_repeat,
                  ring_balance
    [server]      pipeline_latency, nic_idle_timeout, mtu
    [workload]    profile, load, trace, locality
    [run]         mode, seed, duration, gate_nics, gate_rings, probe, keep_samples

Durations accept ``ps/ns/us/ms/s`` suffixes and are written back in the
coarsest exact unit. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .server import NodePipelineParams, PIPELINE_PRESETS
from .switch import SwitchParams
from .topology import SCALES, SiteConfig, TopologyError
from .traffic import PROFILES
from .transceiver import TransceiverParams
from .units import SWITCH_CLOCK_HZ, SWITCH_PIPELINE_CYCLES, US, cycles, format_duration, parse_duration

MODES = ("gated", "always-on", "both")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TransceiverConfig:
    turn_on_delay: int = 1 * US
    turn_off_delay: int = 10 * US
    power_10g: float = 1.0
    power_40g: float = 2.4
    power_off: float = 0.0

    def params(self, bandwidth: float) -> TransceiverParams:
        power = self.power_40g if bandwidth > 10e9 else self.power_10g
        return TransceiverParams(self.turn_on_delay, self.turn_off_delay, power, self.power_off)


@dataclass(frozen=True)
class SwitchConfig:
    queue_capacity: int = 128
    high_watermark: float = 0.75
    low_watermark: float = 0.22
    holddown: int = 50 * US
    control_ttl: int = 3
    clock_hz: float = SWITCH_CLOCK_HZ
    pipeline_cycles: int = SWITCH_PIPELINE_CYCLES
    downlink_assist: bool = True
    assist_repeat: int = 50 * US
    ring_balance: bool = True

    def params(self) -> SwitchParams:
        return SwitchParams(
            queue_capacity=self.queue_capacity,
            high_watermark=self.high_watermark,
            low_watermark=self.low_watermark,
            holddown=self.holddown,
            control_ttl=self.control_ttl,
            pipeline_latency=cycles(self.pipeline_cycles, self.clock_hz),
            arbiter_cycle=cycles(1, self.clock_hz),
            downlink_assist=self.downlink_assist,
            assist_repeat=self.assist_repeat,
            ring_balance=self.ring_balance,
        )


@dataclass(frozen=True)
class ServerConfig:
    pipeline_latency: int = PIPELINE_PRESETS["measured"]
    nic_idle_timeout: int = 100 * US
    mtu: int = 1500

    def params(self) -> NodePipelineParams:
        return NodePipelineParams(self.pipeline_latency, self.nic_idle_timeout, self.mtu)


@dataclass(frozen=True)
class WorkloadConfig:
    profile: str = "fb-web"
    load: float = 0.3
    trace: str = ""
    locality: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    mode: str = "both"
    seed: int = 1
    duration: int = 10 * 1_000_000_000  # 10 ms
    gate_nics: bool = True
    gate_rings: bool = False
    probe: bool = True
    keep_samples: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    site: SiteConfig = field(default_factory=SiteConfig)
    transceiver: TransceiverConfig = field(default_factory=TransceiverConfig)
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def replace(self, section: str, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})

    def validate(self) -> None:
        try:
            self.site.validate()
        except TopologyError as exc:
            raise ConfigError(f"[site] {exc}") from None
        t = self.transceiver
        try:
            t.params(10e9)
            t.params(40e9)
        except ValueError as exc:
            raise ConfigError(f"[transceiver] {exc}") from None
        s = self.switch
        if s.queue_capacity < 1:
            raise ConfigError("[switch] queue_capacity must be >= 1")
        if not 0 <= s.low_watermark < s.high_watermark <= 1:
            raise ConfigError("[switch] need 0 <= low_watermark < high_watermark <= 1")
        if s.holddown < 0 or s.control_ttl < 1 or s.clock_hz <= 0 or s.pipeline_cycles < 0:
            raise ConfigError("[switch] holddown >= 0, control_ttl >= 1, clock_hz > 0 required")
        try:
            self.server.params()
        except ValueError as exc:
            raise ConfigError(f"[server] {exc}") from None
        w = self.workload
        if not w.trace and w.profile not in PROFILES:
            raise ConfigError(f"[workload] unknown profile {w.profile!r}; choose from {', '.join(PROFILES)}")
        if w.load <= 0:
            raise ConfigError("[workload] load must be positive")
        if w.locality:
            if len(w.locality) != 3 or any(p < 0 for p in w.locality) or abs(sum(w.locality) - 1) > 1e-9:
                raise ConfigError("[workload] locality needs three non-negative values summing to 1")
        r = self.run
        if r.mode not in MODES:
            raise ConfigError(f"[run] mode must be one of {', '.join(MODES)}")
        if r.duration < 0:
            raise ConfigError("[run] duration must be >= 0")
        if r.seed < 0:
            raise ConfigError("[run] seed must be >= 0")


DURATION_KEYS = {
    ("transceiver", "turn_on_delay"), ("transceiver", "turn_off_delay"), ("switch", "holddown"), ("switch", "assist_repeat"),
    ("server", "pipeline_latency"), ("server", "nic_idle_timeout"), ("run", "duration"),
}
SECTIONS = ("site", "transceiver", "switch", "server", "workload", "run")


def _format(section: str, name: str, value) -> str:
    if (section, name) in DURATION_KEYS:
        return format_duration(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(section: str, f: dataclasses.Field, text: str, default):
    name = f.name
    text = text.strip()
    try:
        if (section, name) in DURATION_KEYS:
            if section == "server" and name == "pipeline_latency" and text in PIPELINE_PRESETS:
                return PIPELINE_PRESETS[text]
            return parse_duration(text)
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, tuple):
            return tuple(float(x) for x in text.replace(",", " ").split())
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"[{section}] {name}: {exc}") from None


def to_ini(config: ScenarioConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for section in SECTIONS:
        obj = getattr(config, section)
        parser[section] = {f.name: _format(section, f.name, getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    import io

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def apply_ini(text: str, base: ScenarioConfig | None = None, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    config = base or ScenarioConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        obj = getattr(config, section)
        known = {f.name: f for f in dataclasses.fields(obj)}
        changes = {}
        for key, raw in parser[section].items():
            if key not in known:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            changes[key] = _parse(section, known[key], raw, getattr(obj, key))
        config = config.replace(section, **changes)
    return config


def load_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return apply_ini(text, base, str(path))


def scaled(scale: str) -> ScenarioConfig:
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
    return ScenarioConfig(site=SCALES[scale]())
