"""Closed-loop trial engine, metrics, and the replayable transcript.

One trial: synthesize the attended epoch, gate raw artifacts, preprocess
(band-pass + notch, zero phase), decode with the filter-bank correlator,
map to a command, push it through the lossy link with retransmission, let
the agent execute, and encode the resulting red/yellow/green feedback.
Artifact gating runs on the raw epoch: the decode band-pass would strip
the sub-6 Hz blink transient the gate exists to catch.

Timing is a simulated clock. Per-stage latencies are deterministic
functions of the configuration and the trial's derived seed, so a
transcript replays byte-identically.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import c2link, codec, dsp, fbcca, synth
from .agent import AgentEvent, AgentSim, run_command
from .codec import Color, Command, FeedbackFrame, FeedbackStatus
from .config import SessionConfig
from .errors import InvalidArgumentError
from .fbcca import Decision

TRANSCRIPT_HEADER = "#bcilink-transcript v1"


def mix_seed(seed: int, index: int) -> int:
    """64-bit splitmix of (session seed, trial index) -> per-trial seed."""
    mask = (1 << 64) - 1
    z = (seed + 0x9E3779B97F4A7C15 * (index + 1)) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


@dataclass(frozen=True)
class StageLatencies:
    acquire_ms: float
    decode_ms: float
    link_ms: float
    execute_ms: float
    feedback_ms: float

    @property
    def total_ms(self) -> float:
        return (self.acquire_ms + self.decode_ms + self.link_ms
                + self.execute_ms + self.feedback_ms)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    attended_index: int
    epoch_seed: int
    gated: bool
    decision: Decision | None
    command: Command | None
    attempts: int
    acked: bool
    status: FeedbackStatus
    color: Color
    feedback: FeedbackFrame
    latencies: StageLatencies
    agent_ticks: int
    agent_events: tuple[AgentEvent, ...] = ()


@dataclass
class SessionReport:
    trials: list[TrialRecord]
    accuracy: float
    confusion: np.ndarray  # (N, N+1); last column counts rejections
    itr_bits_per_min: float
    mean_margin: float
    n_targets: int
    selection_time_s: float
    seed: int
    config_json: str

    def to_kv(self) -> str:
        lines = [
            f"trials={len(self.trials)}",
            f"n_targets={self.n_targets}",
            f"accuracy={self.accuracy:.6f}",
            f"itr_bits_per_min={self.itr_bits_per_min:.6f}",
            f"mean_margin={self.mean_margin:.6f}",
            f"selection_time_s={self.selection_time_s:.6f}",
            f"seed={self.seed}",
        ]
        for i, row in enumerate(self.confusion):
            lines.append(f"confusion_{i}=" + ",".join(str(int(v)) for v in row))
        lines.append(f"config={self.config_json}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        n = self.n_targets
        head = "attended | " + " ".join(f"p{j:>4d}" for j in range(n)) + "  rej"
        rows = [head, "-" * len(head)]
        for i in range(n):
            cells = " ".join(f"{int(v):>5d}" for v in self.confusion[i])
            rows.append(f"{i:>8d} | {cells}")
        rows.append("")
        rows.append(f"accuracy {self.accuracy:.4f}   "
                    f"ITR {self.itr_bits_per_min:.2f} bits/min   "
                    f"trials {len(self.trials)}")
        return "\n".join(rows) + "\n"


def compute_itr(n_targets: int, accuracy: float, selection_time_s: float) -> float:
    """Information transfer rate in bits/min for an N-choice selector.

    (60/T) * [log2 N + P log2 P + (1-P) log2((1-P)/(N-1))], 0*log2(0) = 0,
    clamped at zero for chance-or-worse accuracy.
    """
    if not isinstance(n_targets, (int, np.integer)) or n_targets < 2:
        raise InvalidArgumentError("n_targets must be an integer >= 2")
    if not (0.0 <= accuracy <= 1.0):
        raise InvalidArgumentError("accuracy must lie in [0, 1]")
    if selection_time_s <= 0:
        raise InvalidArgumentError("selection_time_s must be positive")
    n, p, t = int(n_targets), float(accuracy), float(selection_time_s)
    if p <= 1.0 / n:  # chance or worse carries no usable information
        return 0.0
    bits = math.log2(n) + p * math.log2(p)
    if p < 1.0:
        bits += (1.0 - p) * math.log2((1.0 - p) / (n - 1))
    return max(0.0, (60.0 / t) * bits)


def confusion_matrix(trials: list[TrialRecord], n_targets: int) -> np.ndarray:
    """(i, j) counts attended-i decoded-j; the extra column counts rejections."""
    m = np.zeros((n_targets, n_targets + 1), dtype=np.int64)
    for tr in trials:
        if tr.status == FeedbackStatus.NOT_RECOGNIZED or tr.decision is None \
                or not tr.decision.recognized:
            m[tr.attended_index, n_targets] += 1
        else:
            m[tr.attended_index, tr.decision.predicted_index] += 1
    return m


class SessionRuntime:
    """Single-owner state for one session: agent, link, receiver, clock."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.link = cfg.fresh_link()
        self.receiver = c2link.Receiver()
        self.agent = AgentSim(cfg.world, cfg.sensor_radius, cfg.battery_capacity)
        self.trial_count = 0
        self._bandpass = dsp.design_bandpass(
            cfg.bandpass_order, cfg.bandpass_lo_hz, cfg.bandpass_hi_hz, cfg.fs_hz
        )
        self._notch = dsp.design_notch(cfg.notch_center_hz, cfg.notch_q, cfg.fs_hz)

    def run_trial(self, attended_index: int, trial_index: int | None = None) -> TrialRecord:
        cfg = self.cfg
        if not (0 <= attended_index < cfg.n_targets):
            raise InvalidArgumentError(
                f"attended index {attended_index} outside [0, {cfg.n_targets})"
            )
        if trial_index is None:
            trial_index = self.trial_count
        self.trial_count = trial_index + 1
        trial_seed = mix_seed(cfg.seed, trial_index)

        epoch = synth.generate_epoch(
            cfg.stimulus, attended_index, cfg.montage, cfg.noise,
            cfg.duration_s, cfg.fs_hz, trial_seed,
        )
        if cfg.blink_prob > 0.0:
            blink_rng = random.Random(mix_seed(trial_seed, 0xB11FE))
            if blink_rng.random() < cfg.blink_prob:
                onset = blink_rng.uniform(0.0, max(cfg.duration_s - 0.35, 0.0))
                epoch = synth.inject_blink(
                    epoch, cfg.montage, onset, cfg.blink_amplitude_uv
                )

        acquire_ms = 1000.0 * cfg.duration_s
        decode_ms = 0.0
        link_ms = 0.0
        execute_ms = 0.0
        agent_ticks = 0
        attempts = 0
        acked = False
        decision: Decision | None = None
        command: Command | None = None
        events: tuple[AgentEvent, ...] = ()

        gate = dsp.gate_artifacts(epoch, cfg.artifact_threshold_uv)
        if not gate.clean:
            status = FeedbackStatus.NOT_RECOGNIZED
        else:
            filtered = dsp.apply_zero_phase(self._bandpass, epoch)
            filtered = dsp.apply_zero_phase(self._notch, filtered)
            decode_ms = cfg.decode_cost_ms
            decision = fbcca.classify(filtered, cfg.decoder, cfg.bank)
            command = codec.map_decision(decision, cfg.table, issued_at=trial_index)
            if command is None:
                status = FeedbackStatus.NOT_RECOGNIZED
            else:
                report = c2link.reliable_send(
                    c2link.MSG_COMMAND,
                    trial_index & 0xFFFF,
                    command.id.value.encode("ascii"),
                    self.link,
                    self.receiver,
                    max_retries=cfg.max_retries,
                    ack_timeout_ms=cfg.ack_timeout_ms,
                )
                attempts = report.attempts
                acked = report.acked
                link_ms = report.elapsed_ms
                if not report.acked:
                    # the agent never saw it; the operator learns nothing happened
                    status = FeedbackStatus.NOT_RECOGNIZED
                else:
                    status, evs, agent_ticks = run_command(
                        self.agent, command, cfg.max_ticks_per_command
                    )
                    events = tuple(evs)
                    execute_ms = agent_ticks * cfg.tick_ms

        frame = codec.encode_feedback(
            status, cfg.feedback_blink_hz, cfg.feedback_duration_s
        )
        latencies = StageLatencies(
            acquire_ms=acquire_ms,
            decode_ms=decode_ms,
            link_ms=link_ms,
            execute_ms=execute_ms,
            feedback_ms=1000.0 * cfg.feedback_duration_s,
        )
        return TrialRecord(
            trial_index=trial_index,
            attended_index=attended_index,
            epoch_seed=trial_seed,
            gated=not gate.clean,
            decision=decision,
            command=command,
            attempts=attempts,
            acked=acked,
            status=status,
            color=codec.feedback_color(status),
            feedback=frame,
            latencies=latencies,
            agent_ticks=agent_ticks,
            agent_events=events,
        )


def run_trial(cfg: SessionConfig, attended_index: int, trial_index: int = 0) -> TrialRecord:
    """One-shot trial on a fresh runtime (fresh agent, link, receiver)."""
    return SessionRuntime(cfg).run_trial(attended_index, trial_index)


def run_session(cfg: SessionConfig, schedule: tuple[int, ...] | None = None) -> SessionReport:
    """Run the configured schedule sequentially with derived per-trial seeds."""
    schedule = tuple(schedule if schedule is not None else cfg.schedule)
    if not schedule:
        raise InvalidArgumentError("schedule is empty")
    runtime = SessionRuntime(cfg)
    trials = [runtime.run_trial(a, i) for i, a in enumerate(schedule)]
    return build_report(cfg, trials)


def build_report(cfg: SessionConfig, trials: list[TrialRecord]) -> SessionReport:
    n = cfg.n_targets
    conf = confusion_matrix(trials, n)
    accuracy = float(np.trace(conf[:, :n])) / len(trials)
    margins = [t.decision.margin for t in trials if t.decision is not None]
    mean_margin = float(np.mean(margins)) if margins else 0.0
    itr = compute_itr(n, accuracy, cfg.selection_time_s) if n >= 2 else 0.0
    return SessionReport(
        trials=trials,
        accuracy=accuracy,
        confusion=conf,
        itr_bits_per_min=itr,
        mean_margin=mean_margin,
        n_targets=n,
        selection_time_s=cfg.selection_time_s,
        seed=cfg.seed,
        config_json=cfg.resolved_json(),
    )


# --- transcript: one line per trial, documented field order ------------------

def trial_line(tr: TrialRecord) -> str:
    """Fixed field order; see docs/transcript.md."""
    if tr.decision is None:
        predicted, recognized, margin, scores = -1, 0, 0.0, "-"
    else:
        predicted = tr.decision.predicted_index
        recognized = int(tr.decision.recognized)
        margin = tr.decision.margin
        scores = ":".join(f"{s:.6f}" for s in tr.decision.scores)
    lat = tr.latencies
    return (
        f"trial={tr.trial_index}"
        f" attended={tr.attended_index}"
        f" seed={tr.epoch_seed}"
        f" gated={int(tr.gated)}"
        f" predicted={predicted}"
        f" recognized={recognized}"
        f" margin={margin:.6f}"
        f" scores={scores}"
        f" command={tr.command.id.value if tr.command else '-'}"
        f" attempts={tr.attempts}"
        f" acked={int(tr.acked)}"
        f" status={tr.status.value}"
        f" color={tr.color.value}"
        f" ticks={tr.agent_ticks}"
        f" lat_acquire={lat.acquire_ms:.3f}"
        f" lat_decode={lat.decode_ms:.3f}"
        f" lat_link={lat.link_ms:.3f}"
        f" lat_execute={lat.execute_ms:.3f}"
        f" lat_feedback={lat.feedback_ms:.3f}"
    )


def transcript_text(cfg: SessionConfig, report: SessionReport,
                    schedule: tuple[int, ...] | None = None) -> str:
    schedule = tuple(schedule if schedule is not None else cfg.schedule)
    lines = [
        TRANSCRIPT_HEADER,
        f"#config {cfg.resolved_json()}",
        f"#seed {cfg.seed}",
        "#schedule " + ",".join(str(i) for i in schedule),
    ]
    lines.extend(trial_line(t) for t in report.trials)
    return "\n".join(lines) + "\n"


def parse_transcript_header(text: str) -> tuple[dict, int, tuple[int, ...]]:
    """Recover (raw config, seed, schedule) from a transcript."""
    import json

    lines = text.splitlines()
    if not lines or lines[0] != TRANSCRIPT_HEADER:
        raise InvalidArgumentError("not a transcript (missing header line)")
    cfg_raw: dict | None = None
    seed: int | None = None
    schedule: tuple[int, ...] | None = None
    for line in lines[1:]:
        if line.startswith("#config "):
            cfg_raw = json.loads(line[len("#config "):])
        elif line.startswith("#seed "):
            seed = int(line[len("#seed "):])
        elif line.startswith("#schedule "):
            schedule = tuple(int(v) for v in line[len("#schedule "):].split(","))
    if cfg_raw is None or seed is None or schedule is None:
        raise InvalidArgumentError("transcript header incomplete")
    return cfg_raw, seed, schedule
