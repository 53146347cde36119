"""Session configuration: YAML schema, defaults, cross-module validation.

Every run embeds its fully resolved config (canonical JSON) and seed in its
outputs. Environment variables never override science parameters; only
BCILINK_OUT_DIR may redirect output paths.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import codec
from .agent import World, load_world, parse_world
from .c2link import LinkModel
from .codec import CommandTable
from .errors import BciLinkError, ConfigError, InvalidArgumentError
from .fbcca import FbccaConfig, FilterBank, build_filter_bank
from .stimulus import StimulusConfig
from .synth import ChannelModel, NoiseModel, default_montage, required_fs_hz

OUT_DIR_ENV = "BCILINK_OUT_DIR"

DEFAULT_WORLD_TEXT = """\
........
........
..T.....
........
....S...
........
......V.
........
"""

DEFAULT_CONFIG: dict[str, Any] = {
    "stimulus": {
        "frequencies_hz": [8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
        "phases_rad": [],
    },
    "montage": "default",
    "noise": {
        "snr_db": 10.0,
        "pink_fraction": 0.5,
        "alpha_amp_uv": 2.0,
        "harmonic_decay": 0.5,
        "noise_rms_uv": 10.0,
    },
    "epoch": {"duration_s": 2.0, "fs_hz": 250.0},
    "preprocess": {
        "bandpass": {"order": 4, "lo_hz": 6.0, "hi_hz": 60.0},
        "notch": {"center_hz": 50.0, "q": 30.0},
        "artifact_threshold_uv": 100.0,
        "blink_prob": 0.0,
        "blink_amplitude_uv": 150.0,
    },
    "decoder": {
        "n_harmonics": 4,
        "n_subbands": 4,
        "weight_a": 1.25,
        "weight_b": 0.25,
        "decision_margin": 0.05,
        "subband_order": 8,
    },
    "command_table": list(codec.DEFAULT_COMMAND_NAMES),
    "link": {
        "drop_prob": 0.0,
        "latency_ms_min": 5.0,
        "latency_ms_max": 25.0,
        "bit_flip_prob": 0.0,
        "max_retries": 3,
        "ack_timeout_ms": 100.0,
    },
    "feedback": {"blink_hz": 2.0, "duration_s": 1.0},
    "agent": {
        "sensor_radius": 2,
        "battery_capacity": 1000.0,
        "tick_ms": 100.0,
        "max_ticks_per_command": 5000,
    },
    "world_text": DEFAULT_WORLD_TEXT,
    "session": {"inter_trial_gap_s": 0.5, "decode_cost_ms": 50.0},
    "schedule": {"repeats": 10},
    "seed": 42,
    "out_dir": "out",
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _get(d: dict, path: str, kind, *, positive=False, nonneg=False):
    cur: Any = d
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(path, "missing")
        cur = cur[part]
    try:
        if kind is float:
            cur = float(cur)
        elif kind is int:
            if isinstance(cur, float) and cur != int(cur):
                raise ValueError
            cur = int(cur)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected {kind.__name__}, got {cur!r}") from None
    if kind not in (float, int) and not isinstance(cur, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(cur).__name__}")
    if positive and cur <= 0:
        raise ConfigError(path, "must be positive")
    if nonneg and cur < 0:
        raise ConfigError(path, "must be non-negative")
    return cur


@dataclass
class SessionConfig:
    """Validated, assembled session parameters plus the resolved raw dict."""

    stimulus: StimulusConfig
    montage: ChannelModel
    noise: NoiseModel
    duration_s: float
    fs_hz: float
    bandpass_order: int
    bandpass_lo_hz: float
    bandpass_hi_hz: float
    notch_center_hz: float
    notch_q: float
    artifact_threshold_uv: float
    blink_prob: float
    blink_amplitude_uv: float
    decoder: FbccaConfig
    bank: FilterBank
    table: CommandTable
    link: LinkModel
    max_retries: int
    ack_timeout_ms: float
    feedback_blink_hz: float
    feedback_duration_s: float
    world: World
    sensor_radius: int
    battery_capacity: float
    tick_ms: float
    max_ticks_per_command: int
    inter_trial_gap_s: float
    decode_cost_ms: float
    schedule: tuple[int, ...]
    seed: int
    out_dir: Path
    raw: dict

    @property
    def n_targets(self) -> int:
        return self.stimulus.count

    @property
    def selection_time_s(self) -> float:
        return self.duration_s + self.inter_trial_gap_s

    def resolved_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def fresh_link(self) -> LinkModel:
        link = self.link
        return LinkModel(
            link.drop_prob, link.latency_ms_min, link.latency_ms_max,
            link.bit_flip_prob, link.seed,
        )


def build_config(overrides: dict | None = None, base_dir: Path | None = None) -> SessionConfig:
    """Merge overrides onto the defaults and validate everything."""
    raw = _merge(DEFAULT_CONFIG, overrides or {})
    base_dir = base_dir or Path.cwd()

    freqs = _get(raw, "stimulus.frequencies_hz", list)
    phases = _get(raw, "stimulus.phases_rad", list)
    try:
        stimulus = StimulusConfig(tuple(freqs), tuple(phases))
    except InvalidArgumentError as e:
        raise ConfigError("stimulus.frequencies_hz", str(e)) from None

    montage_spec = raw["montage"]
    if montage_spec == "default":
        montage = default_montage()
    elif isinstance(montage_spec, dict):
        try:
            montage = ChannelModel(
                tuple(montage_spec["channel_names"]),
                tuple(float(g) for g in montage_spec["ssvep_gain"]),
                tuple(float(g) for g in montage_spec["blink_gain"]),
            )
        except (KeyError, TypeError, InvalidArgumentError) as e:
            raise ConfigError("montage", str(e)) from None
    else:
        raise ConfigError("montage", f"expected 'default' or a mapping, got {montage_spec!r}")

    try:
        noise = NoiseModel(
            snr_db=_get(raw, "noise.snr_db", float),
            pink_fraction=_get(raw, "noise.pink_fraction", float),
            alpha_amp_uv=_get(raw, "noise.alpha_amp_uv", float, nonneg=True),
            harmonic_decay=_get(raw, "noise.harmonic_decay", float),
            noise_rms_uv=_get(raw, "noise.noise_rms_uv", float, positive=True),
        )
    except InvalidArgumentError as e:
        raise ConfigError("noise", str(e)) from None

    duration_s = _get(raw, "epoch.duration_s", float, positive=True)
    fs_hz = _get(raw, "epoch.fs_hz", float, positive=True)
    if fs_hz < required_fs_hz(stimulus):
        raise ConfigError(
            "epoch.fs_hz",
            f"{fs_hz} Hz below the 4th-harmonic requirement "
            f"{required_fs_hz(stimulus)} Hz for stimuli up to {stimulus.max_hz} Hz",
        )

    bp_order = _get(raw, "preprocess.bandpass.order", int)
    bp_lo = _get(raw, "preprocess.bandpass.lo_hz", float, positive=True)
    bp_hi = _get(raw, "preprocess.bandpass.hi_hz", float, positive=True)
    if not (0 < bp_lo < bp_hi < fs_hz / 2):
        raise ConfigError("preprocess.bandpass", f"edges ({bp_lo}, {bp_hi}) invalid for fs {fs_hz}")
    notch_c = _get(raw, "preprocess.notch.center_hz", float, positive=True)
    notch_q = _get(raw, "preprocess.notch.q", float, positive=True)
    if notch_c >= fs_hz / 2:
        raise ConfigError("preprocess.notch.center_hz", f"{notch_c} at or above Nyquist")

    try:
        decoder = FbccaConfig(
            stimulus=stimulus,
            n_harmonics=_get(raw, "decoder.n_harmonics", int, positive=True),
            n_subbands=_get(raw, "decoder.n_subbands", int, positive=True),
            weight_a=_get(raw, "decoder.weight_a", float),
            weight_b=_get(raw, "decoder.weight_b", float),
            decision_margin=_get(raw, "decoder.decision_margin", float, nonneg=True),
            fs_hz=fs_hz,
            subband_order=_get(raw, "decoder.subband_order", int),
        )
        bank = build_filter_bank(stimulus, decoder.n_subbands)
    except InvalidArgumentError as e:
        raise ConfigError("decoder", str(e)) from None
    if decoder.n_harmonics * stimulus.max_hz >= fs_hz / 2:
        raise ConfigError(
            "decoder.n_harmonics",
            f"harmonic {decoder.n_harmonics * stimulus.max_hz} Hz at or above Nyquist",
        )

    table_names = _get(raw, "command_table", list)
    try:
        table = CommandTable(tuple(table_names))
    except (ValueError, InvalidArgumentError) as e:
        raise ConfigError("command_table", str(e)) from None
    if table.size != stimulus.count:
        raise ConfigError(
            "command_table",
            f"{table.size} entries for {stimulus.count} stimulus targets",
        )

    try:
        link = LinkModel(
            drop_prob=_get(raw, "link.drop_prob", float),
            latency_ms_min=_get(raw, "link.latency_ms_min", float),
            latency_ms_max=_get(raw, "link.latency_ms_max", float),
            bit_flip_prob=_get(raw, "link.bit_flip_prob", float),
            seed=_get(raw, "seed", int),
        )
    except InvalidArgumentError as e:
        raise ConfigError("link", str(e)) from None

    fb_hz = _get(raw, "feedback.blink_hz", float, positive=True)
    fb_dur = _get(raw, "feedback.duration_s", float, positive=True)
    if not (codec.FEEDBACK_BLINK_MIN_HZ <= fb_hz <= codec.FEEDBACK_BLINK_MAX_HZ):
        raise ConfigError("feedback.blink_hz", f"{fb_hz} outside [1, 5] Hz")

    if "world_text" in raw and raw.get("world_text"):
        try:
            world = parse_world(raw["world_text"])
        except InvalidArgumentError as e:
            raise ConfigError("world_text", str(e)) from None
    else:
        world_path = Path(str(_get(raw, "world", str)))
        if not world_path.is_absolute():
            world_path = base_dir / world_path
        if not world_path.exists():
            raise ConfigError("world", f"file not found: {world_path}")
        try:
            world = load_world(world_path)
        except InvalidArgumentError as e:
            raise ConfigError("world", str(e)) from None

    schedule_spec = raw.get("schedule")
    if isinstance(schedule_spec, list):
        schedule = tuple(int(i) for i in schedule_spec)
    elif isinstance(schedule_spec, dict):
        repeats = _get(raw, "schedule.repeats", int, positive=True)
        schedule = tuple(range(stimulus.count)) * repeats
    else:
        raise ConfigError("schedule", "expected a list of target indices or {repeats: n}")
    if not schedule:
        raise ConfigError("schedule", "schedule is empty")
    for i in schedule:
        if not (0 <= i < stimulus.count):
            raise ConfigError("schedule", f"target index {i} outside [0, {stimulus.count})")

    out_dir = Path(os.environ.get(OUT_DIR_ENV, "") or str(raw.get("out_dir", "out")))

    return SessionConfig(
        stimulus=stimulus,
        montage=montage,
        noise=noise,
        duration_s=duration_s,
        fs_hz=fs_hz,
        bandpass_order=bp_order,
        bandpass_lo_hz=bp_lo,
        bandpass_hi_hz=bp_hi,
        notch_center_hz=notch_c,
        notch_q=notch_q,
        artifact_threshold_uv=_get(raw, "preprocess.artifact_threshold_uv", float, positive=True),
        blink_prob=_get(raw, "preprocess.blink_prob", float, nonneg=True),
        blink_amplitude_uv=_get(raw, "preprocess.blink_amplitude_uv", float, positive=True),
        decoder=decoder,
        bank=bank,
        table=table,
        link=link,
        max_retries=_get(raw, "link.max_retries", int, nonneg=True),
        ack_timeout_ms=_get(raw, "link.ack_timeout_ms", float, positive=True),
        feedback_blink_hz=fb_hz,
        feedback_duration_s=fb_dur,
        world=world,
        sensor_radius=_get(raw, "agent.sensor_radius", int, nonneg=True),
        battery_capacity=_get(raw, "agent.battery_capacity", float, positive=True),
        tick_ms=_get(raw, "agent.tick_ms", float, positive=True),
        max_ticks_per_command=_get(raw, "agent.max_ticks_per_command", int, positive=True),
        inter_trial_gap_s=_get(raw, "session.inter_trial_gap_s", float, nonneg=True),
        decode_cost_ms=_get(raw, "session.decode_cost_ms", float, nonneg=True),
        schedule=schedule,
        seed=_get(raw, "seed", int),
        out_dir=out_dir,
        raw=raw,
    )


def load_config(path: str | Path) -> SessionConfig:
    """Parse a YAML config file and validate it against the defaults."""
    import yaml

    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError("config", f"YAML parse error: {e}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return build_config(data, base_dir=path.parent)
