"""Live-session service over a local TCP socket.

Newline-delimited text messages, same key=value conventions as the
transcript (grammar in protocol.md). The console declares the attended
target; the gateway runs the full decode/command/execute loop on the
shared session runtime and streams the result, agent events, and the
feedback frame back, strictly ordered by a per-direction seq counter.

One console connection is served at a time; the session (trial counter,
agent, link state) persists across reconnects, and the collected trials
replay byte-identically through the batch path (same seed derivation).
"""
from __future__ import annotations

import socket
import threading
import time
from pathlib import Path

from . import session as session_mod
from .codec import FeedbackStatus
from .config import SessionConfig, build_config
from .errors import BciLinkError, ConfigError
from .session import SessionRuntime, TrialRecord


def _fmt(msg_type: str, seq: int, **fields) -> str:
    parts = [msg_type, f"seq={seq}"]
    for k, v in fields.items():
        parts.append(f"{k}={v}")
    return " ".join(parts)


class Gateway:
    def __init__(self, cfg: SessionConfig, host: str = "127.0.0.1", port: int = 0):
        self.cfg = cfg
        self.runtime = SessionRuntime(cfg)
        self.trials: list[TrialRecord] = []
        self.attends: list[int] = []
        self._host = host
        self._port = port
        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self._busy = False

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._sock = socket.create_server((self._host, self._port))
        self._sock.settimeout(0.2)
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        assert self._sock is not None
        return self._sock.getsockname()[:2]

    def wait(self) -> None:
        while self._thread and self._thread.is_alive():
            self._thread.join(timeout=0.5)

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5.0)
        if self._sock:
            self._sock.close()
            self._sock = None
        self.write_outputs()

    def write_outputs(self) -> None:
        if not self.trials:
            return
        out = self.cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        report = session_mod.build_report(self.cfg, self.trials)
        text = session_mod.transcript_text(self.cfg, report, tuple(self.attends))
        (out / "gateway_transcript.txt").write_text(text)
        (out / "gateway_report.kv").write_text(report.to_kv())

    # -- connection handling -------------------------------------------------

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                try:
                    self._handle(conn)
                except (ConnectionError, OSError):
                    pass

    def _handle(self, conn: socket.socket) -> None:
        conn.settimeout(0.2)
        seq = 0

        def send(msg_type: str, **fields) -> None:
            nonlocal seq
            line = _fmt(msg_type, seq, **fields)
            seq += 1
            conn.sendall(line.encode("utf-8") + b"\n")

        self._send_hello(send)
        buf = b""
        while not self._stop.is_set():
            try:
                chunk = conn.recv(4096)
            except socket.timeout:
                continue
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                text = line.decode("utf-8", errors="replace").strip()
                if not text:
                    continue
                if text == "bye":
                    self.write_outputs()
                    return
                self._dispatch(text, send)
        self.write_outputs()

    def _send_hello(self, send) -> None:
        cfg = self.cfg
        st = self.runtime.agent.state
        send(
            "hello",
            version=1,
            targets=cfg.n_targets,
            freqs=":".join(f"{f:g}" for f in cfg.stimulus.frequencies_hz),
            commands=":".join(e.value for e in cfg.table.entries),
            feedback_blink_hz=f"{cfg.feedback_blink_hz:g}",
            feedback_duration_s=f"{cfg.feedback_duration_s:g}",
            world_w=cfg.world.grid.width,
            world_h=cfg.world.grid.height,
            agent_x=st.position[0],
            agent_y=st.position[1],
            trials_done=len(self.trials),
        )
        # reconnect resync: reveal the already-known map and prior sightings
        known = st.known_map
        cells = [
            f"{x}:{y}:{int(known.cells[y, x])}"
            for y in range(known.height)
            for x in range(known.width)
            if known.cells[y, x] != 2
        ]
        send(
            "snapshot",
            mode=st.mode.value,
            battery=f"{st.battery_pct:.1f}",
            known=",".join(cells) if cells else "-",
            sightings=",".join(
                f"{s.target_id}:{s.kind}:{s.cell[0]}:{s.cell[1]}" for s in st.sightings
            ) or "-",
        )

    def _dispatch(self, text: str, send) -> None:
        parts = text.split()
        kind, kv = parts[0], {}
        for p in parts[1:]:
            if "=" in p:
                k, v = p.split("=", 1)
                kv[k] = v
        if kind == "attend":
            self._handle_attend(kv, send)
        elif kind == "configure":
            self._handle_configure(kv, send)
        else:
            send("error", code="unknown_type", msg=kind)

    def _handle_attend(self, kv: dict, send) -> None:
        if self._busy:
            send("error", code="busy", msg="trial in progress")
            return
        try:
            target = int(kv.get("target", ""))
        except ValueError:
            send("error", code="bad_target", msg="attend needs target=<int>")
            return
        if not (0 <= target < self.cfg.n_targets):
            send("error", code="bad_target",
                 msg=f"target must be in [0,{self.cfg.n_targets})")
            return
        self._busy = True
        t0 = time.monotonic()
        try:
            tr = self.runtime.run_trial(target)
        finally:
            self._busy = False
        self.trials.append(tr)
        self.attends.append(target)
        wall_ms = (time.monotonic() - t0) * 1000.0

        if tr.decision is None:
            predicted, recognized, margin, scores = -1, 0, 0.0, "-"
        else:
            predicted = tr.decision.predicted_index
            recognized = int(tr.decision.recognized)
            margin = tr.decision.margin
            scores = ":".join(f"{s:.6f}" for s in tr.decision.scores)
        send(
            "trial_result",
            trial=tr.trial_index,
            attended=tr.attended_index,
            predicted=predicted,
            recognized=recognized,
            margin=f"{margin:.6f}",
            scores=scores,
            command=tr.command.id.value if tr.command else "-",
        )
        for ev in tr.agent_events:
            send("agent_event", **{"tick": ev.tick, "kind": ev.kind}, **ev.data)
        send(
            "feedback",
            color=tr.color.value,
            blink_hz=f"{tr.feedback.blink_hz:g}",
            duration_s=f"{tr.feedback.duration_s:g}",
            status=tr.status.value,
            wall_ms=f"{wall_ms:.1f}",  # reported, never asserted
        )
        report = session_mod.build_report(self.cfg, self.trials)
        send(
            "metrics",
            trials=len(self.trials),
            accuracy=f"{report.accuracy:.6f}",
            itr_bits_per_min=f"{report.itr_bits_per_min:.6f}",
        )

    def _handle_configure(self, kv: dict, send) -> None:
        if self._busy:
            send("error", code="busy", msg="configure rejected mid-trial")
            return
        overrides: dict = {}
        for dotted, raw_val in kv.items():
            node = overrides
            keys = dotted.split(".")
            for k in keys[:-1]:
                node = node.setdefault(k, {})
            val: object = raw_val
            try:
                val = int(raw_val)
            except ValueError:
                try:
                    val = float(raw_val)
                except ValueError:
                    pass
            node[keys[-1]] = val
        try:
            merged = _deep_merge(self.cfg.raw, overrides)
            new_cfg = build_config(merged)
        except ConfigError as e:
            send("error", code="config", msg=str(e).replace(" ", "_"))
            return
        same_world = new_cfg.raw.get("world_text") == self.cfg.raw.get("world_text") \
            and new_cfg.raw.get("world") == self.cfg.raw.get("world")
        old = self.runtime
        self.cfg = new_cfg
        self.runtime = SessionRuntime(new_cfg)
        if same_world:
            self.runtime.agent = old.agent
            self.runtime.link = old.link
            self.runtime.receiver = old.receiver
            self.runtime.trial_count = old.trial_count
        send("configured", fields=len(kv))


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


class ConsoleClient:
    """Minimal scripted console speaking the gateway protocol (tests, demo)."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._buf = b""

    def close(self) -> None:
        self.sock.close()

    def send_line(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def read_message(self) -> dict:
        while b"\n" not in self._buf:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("gateway closed the connection")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        parts = line.decode("utf-8").split()
        msg = {"type": parts[0]}
        for p in parts[1:]:
            if "=" in p:
                k, v = p.split("=", 1)
                msg[k] = v
        return msg

    def attend(self, target: int) -> list[dict]:
        """Send one attend and collect messages through the trailing metrics."""
        self.send_line(f"attend target={target}")
        out = []
        while True:
            msg = self.read_message()
            out.append(msg)
            if msg["type"] in ("metrics", "error"):
                return out
