"""Command-line interface: train, generate, inspect.

Flag values win over config-file values, which win over built-in defaults.
Config files are plain ``key=value`` lines (keys match the long flag names);
unknown keys are rejected. Exit codes: 0 success, 1 pipeline error, 2 usage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import NotegenError
from .generator import GenerateConfig, export, generate
from .midi_codec import merge_tracks, parse_midi
from .note_matrix import events_to_matrix
from .trainer import TrainConfig, TrainRecord, train

def _parse_bool(value: str) -> bool:
    return value.lower() in ("1", "true", "yes", "on")


# name -> (converter, default); None default means "required unless given"
_TRAIN_OPTIONS = {
    "data": (str, None),
    "epochs": (int, 200),
    "window": (int, 50),
    "hidden": (int, 512),
    "dropout": (float, 0.75),
    "lr": (float, 1e-4),
    "rho": (float, 0.9),
    "epsilon": (float, 1e-8),
    "batch": (int, 64),
    "seed": (int, 0),
    "clip-norm": (float, 5.0),
    "out": (str, "model.ckpt"),
    "metrics": (str, "metrics.csv"),
    "resume": (str, None),
}

_GENERATE_OPTIONS = {
    "model": (str, None),
    "out": (str, None),
    "seed-midi": (str, None),
    "random-seed": (_parse_bool, False),
    "seed": (int, 0),
    "length": (int, 100),
    "duration": (int, None),
}


def _read_config_file(path: str, options: dict,
                      parser: argparse.ArgumentParser) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in options:
            parser.error(f"{path}:{line_no}: unknown key {key!r}")
        convert = options[key][0]
        try:
            values[key] = convert(raw.strip())
        except ValueError:
            parser.error(f"{path}:{line_no}: bad value for {key!r}")
    return values


def _merge(args: argparse.Namespace, options: dict,
           parser: argparse.ArgumentParser) -> dict:
    """command line > config file > defaults."""
    from_file = {}
    if getattr(args, "config", None):
        from_file = _read_config_file(args.config, options, parser)
    merged = {}
    for name, (_, default) in options.items():
        cli_value = getattr(args, name.replace("-", "_"))
        if cli_value is not None:
            merged[name] = cli_value
        elif name in from_file:
            merged[name] = from_file[name]
        else:
            merged[name] = default
    return merged


def _print_epoch(record: TrainRecord) -> None:
    print(f"epoch {record.epoch}: loss {record.loss:.6g} "
          f"accuracy {record.accuracy:.4f} ({record.wall_seconds:.1f}s)")


def cmd_train(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    opts = _merge(args, _TRAIN_OPTIONS, parser)
    if opts["data"] is None:
        parser.error("--data is required")
    clip = opts["clip-norm"]
    config = TrainConfig(
        corpus_dir=opts["data"],
        window=opts["window"],
        hidden=opts["hidden"],
        dropout_rate=opts["dropout"],
        lr=opts["lr"],
        rho=opts["rho"],
        epsilon=opts["epsilon"],
        batch_size=opts["batch"],
        epochs=opts["epochs"],
        seed=opts["seed"],
        clip_norm=None if clip == 0 else clip,
        checkpoint_path=opts["out"],
        metrics_path=opts["metrics"],
        resume_from=opts["resume"],
    )
    train(config, progress=_print_epoch)
    print(f"checkpoint: {config.checkpoint_path}")
    print(f"metrics: {config.metrics_path}")
    return 0


def cmd_generate(args: argparse.Namespace,
                 parser: argparse.ArgumentParser) -> int:
    opts = _merge(args, _GENERATE_OPTIONS, parser)
    for required in ("model", "out"):
        if opts[required] is None:
            parser.error(f"--{required} is required")
    if (opts["seed-midi"] is None) == (not opts["random-seed"]):
        parser.error("exactly one of --seed-midi or --random-seed is required")
    if opts["length"] < 1:
        parser.error("--length must be >= 1")
    config = GenerateConfig(
        checkpoint_path=opts["model"],
        output_path=opts["out"],
        length=opts["length"],
        seed_midi=opts["seed-midi"],
        rng_seed=opts["seed"],
        note_duration_ticks=opts["duration"],
    )
    matrix = generate(config)
    export(matrix, config)
    print(f"notes: {len(matrix.rows)}")
    print(f"output: {config.output_path}")
    return 0


def _quantiles(values: list[int]) -> str:
    ordered = sorted(values)
    pick = lambda p: ordered[min(len(ordered) - 1, int(p * len(ordered)))]
    return f"{ordered[0]}/{pick(0.5)}/{pick(0.9)}/{ordered[-1]}"


def cmd_inspect(args: argparse.Namespace,
                parser: argparse.ArgumentParser) -> int:
    midi = parse_midi(Path(args.path).read_bytes())
    events, tempo = merge_tracks(midi)
    matrix = events_to_matrix(events, midi.division)
    print(f"format: {midi.format}")
    print(f"division: {midi.division}")
    print(f"tracks: {len(midi.tracks)}")
    print(f"tempo: {tempo} us/quarter")
    print(f"notes: {len(matrix.rows)}")
    if matrix.rows:
        pitches = [r.pitch for r in matrix.rows]
        dts = [r.dt_ticks for r in matrix.rows]
        print(f"pitch range: {min(pitches)}-{max(pitches)}")
        print(f"dt ticks min/p50/p90/max: {_quantiles(dts)}")
    else:
        print("pitch range: -")
        print("dt ticks min/p50/p90/max: -")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="notegen",
        description="Train an LSTM on MIDI note sequences and generate music.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a MIDI corpus")
    p_train.add_argument("--config", help="key=value config file")
    p_train.add_argument("--data", help="directory of .mid files")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--window", type=int)
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--rho", type=float)
    p_train.add_argument("--epsilon", type=float)
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--clip-norm", type=float,
                         help="global-norm gradient clip; 0 disables")
    p_train.add_argument("--out", help="checkpoint output path")
    p_train.add_argument("--metrics", help="metrics CSV path")
    p_train.add_argument("--resume", help="checkpoint to resume from")
    p_train.set_defaults(func=cmd_train)

    p_gen = sub.add_parser("generate", help="generate MIDI from a checkpoint")
    p_gen.add_argument("--config", help="key=value config file")
    p_gen.add_argument("--model", help="checkpoint path")
    p_gen.add_argument("--out", help="output MIDI path")
    p_gen.add_argument("--seed-midi", help="MIDI file seeding the window")
    p_gen.add_argument("--random-seed", action="store_const", const=True,
                       help="seed the window with uniform random rows")
    p_gen.add_argument("--seed", type=int, help="RNG seed for --random-seed")
    p_gen.add_argument("--length", type=int, help="number of notes")
    p_gen.add_argument("--duration", type=int,
                       help="note duration in ticks (default division/2)")
    p_gen.set_defaults(func=cmd_generate)

    p_inspect = sub.add_parser("inspect", help="summarize a MIDI file")
    p_inspect.add_argument("path")
    p_inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except NotegenError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
