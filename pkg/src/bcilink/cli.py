"""Batch entry point: run sessions, sweeps, epoch export, demo, replay.

Exit codes: 0 success, 2 configuration error, 3 runtime error. Errors print
one machine-parseable line to stderr: `error: <field-or-stage>: <message>`.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import session as session_mod
from . import synth
from .config import SessionConfig, build_config, load_config
from .errors import BciLinkError, ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(args) -> SessionConfig:
    cfg = load_config(args.config) if args.config else build_config({})
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if overrides:
        base = Path(args.config).parent if args.config else None
        merged = dict(cfg.raw)
        merged.update(overrides)
        cfg = build_config(merged, base_dir=base or Path.cwd())
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    report = session_mod.run_session(cfg)
    out = cfg.out_dir
    _atomic_write(out / "transcript.txt", session_mod.transcript_text(cfg, report))
    _atomic_write(out / "report.kv", report.to_kv())
    _atomic_write(out / "report.txt", report.table())
    print(f"trials={len(report.trials)} accuracy={report.accuracy:.4f} "
          f"itr={report.itr_bits_per_min:.2f} out={out}")
    return EXIT_OK


def _axis_override(axis: str, value: float, cfg: SessionConfig) -> dict:
    if axis == "snr_db":
        return {"noise": {"snr_db": float(value)}}
    if axis == "epoch_s":
        return {"epoch": {"duration_s": float(value)}}
    if axis == "n_targets":
        n = int(value)
        if not (2 <= n <= cfg.stimulus.count):
            raise ConfigError("values", f"n_targets {n} outside [2, {cfg.stimulus.count}]")
        return {
            "stimulus": {
                "frequencies_hz": list(cfg.stimulus.frequencies_hz[:n]),
                "phases_rad": list(cfg.stimulus.phases_rad[:n]),
            },
            "command_table": [e.value for e in cfg.table.entries[:n]],
            "schedule": {"repeats": max(1, len(cfg.schedule) // n)},
        }
    raise ConfigError("axis", f"unknown sweep axis {axis!r}")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if not args.values:
        raise ConfigError("values", "empty sweep values list")
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ConfigError("values", "empty sweep values list")
    rows = [f"# sweep axis={args.axis} seed={cfg.seed}",
            "value\taccuracy\titr_bits_per_min\tmean_margin"]
    for ci, v in enumerate(values):
        overrides = dict(cfg.raw)
        overrides = _merge_dicts(overrides, _axis_override(args.axis, v, cfg))
        overrides["seed"] = session_mod.mix_seed(cfg.seed, ci)  # independent cells
        cell_cfg = build_config(overrides)
        rep = session_mod.run_session(cell_cfg)
        rows.append(f"{v:g}\t{rep.accuracy:.6f}\t{rep.itr_bits_per_min:.6f}"
                    f"\t{rep.mean_margin:.6f}")
    out = cfg.out_dir / f"sweep_{args.axis}.tsv"
    _atomic_write(out, "\n".join(rows) + "\n")
    print(f"sweep axis={args.axis} cells={len(values)} out={out}")
    return EXIT_OK


def _merge_dicts(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge_dicts(out[k], v)
        else:
            out[k] = v
    return out


def cmd_export_epochs(args) -> int:
    cfg = _load(args)
    if args.count < 1:
        raise ConfigError("count", "must be >= 1")
    out = Path(args.out) if args.out else cfg.out_dir / "epochs"
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        attended = cfg.schedule[i % len(cfg.schedule)]
        seed = session_mod.mix_seed(cfg.seed, i)
        epoch = synth.generate_epoch(
            cfg.stimulus, attended, cfg.montage, cfg.noise,
            cfg.duration_s, cfg.fs_hz, seed,
        )
        synth.epoch_to_csv(epoch, out / f"epoch_{i:04d}.csv")
    print(f"exported={args.count} out={out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    text = Path(args.transcript).read_text()
    raw, seed, schedule = session_mod.parse_transcript_header(text)
    raw = dict(raw)
    raw["seed"] = seed
    cfg = build_config(raw)
    report = session_mod.run_session(cfg, schedule)
    regenerated = session_mod.transcript_text(cfg, report, schedule)
    if regenerated == text:
        print(f"replay ok trials={len(report.trials)}")
        return EXIT_OK
    print("error: replay: transcript mismatch", file=sys.stderr)
    return EXIT_RUNTIME


def cmd_demo(args) -> int:
    from .gateway import Gateway

    cfg = _load(args)
    gw = Gateway(cfg, host=args.host, port=args.port)
    gw.start()
    print(f"gateway listening on {gw.address[0]}:{gw.address[1]}")
    print("protocol: newline-delimited text, see protocol.md; Ctrl-C stops")
    try:
        gw.wait()
    except KeyboardInterrupt:
        pass
    finally:
        gw.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bcilink",
        description="Closed-loop SSVEP decode/command/feedback simulator",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file (defaults otherwise)")
        sp.add_argument("--seed", type=int, help="override the session seed")
        sp.add_argument("--out", help="override the output directory")

    sp = sub.add_parser("run", help="run the configured session")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("sweep", help="sweep one axis, one session per value")
    common(sp)
    sp.add_argument("--axis", required=True, choices=["snr_db", "epoch_s", "n_targets"])
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("export-epochs", help="write epochs as CSV files")
    common(sp)
    sp.add_argument("--count", type=int, required=True)
    sp.set_defaults(fn=cmd_export_epochs)

    sp = sub.add_parser("replay", help="re-run a transcript and verify it")
    sp.add_argument("transcript")
    sp.set_defaults(fn=cmd_replay)

    sp = sub.add_parser("demo", help="serve a live session for the console")
    common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=0)
    sp.set_defaults(fn=cmd_demo)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BciLinkError as e:
        print(f"error: runtime: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
