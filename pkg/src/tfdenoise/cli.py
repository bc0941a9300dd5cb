"""Command-line entry point.

Exit codes: 0 ok, 2 usage or input error, 3 training diverged, 4 model mismatch.
Any flag may also come from ``--config FILE`` (``key = value`` lines, keys
named like the flag without dashes); flags on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .audio import read_wav, split_track, write_wav
from .checkpoint import load_checkpoint, save_checkpoint
from .enhance import denoise_waveform
from .errors import (CorruptCheckpoint, DenoiseError, DivergedError, EmptyCorpus,
                     VersionMismatch)
from .manifest import build_manifest, load_pair, read_manifest, write_manifest
from .metrics import evaluate
from .spectrogram import render_png, spectrogram_image
from .tfr import SAMPLE_RATE, StftConfig, max_track_len
from .train import LossWeights, TrainConfig, generator_from_params, train

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_MODEL = 0, 2, 3, 4

log = logging.getLogger("tfdenoise")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="tfdenoise", description="Denoise speech in the time-frequency domain.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file; command-line flags override it")
        p.add_argument("--seed", type=int, default=0)
        subs[name] = p
        return p

    p = add("mix", "build a paired manifest (and optionally the noisy WAVs)")
    p.add_argument("--clean-dir")
    p.add_argument("--noise-dir")
    p.add_argument("--snrs", type=_floats, default="0,5,10")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out-manifest")
    p.add_argument("--materialize-dir", help="also write every noisy mixture here")

    p = add("train", "train generator and discriminator")
    p.add_argument("--manifest")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--grid", type=int, choices=(64, 256), default=64)
    p.add_argument("--out", help="final checkpoint path")
    p.add_argument("--weights", type=_floats, default="1,100,10", help="w_adv,w_l1,w_percep")
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--checkpoint-dir", help="per-epoch checkpoints (default: <out>.ckpt/)")
    p.add_argument("--log", help="training log (default: <out>.log)")
    p.add_argument("--resume", help="continue from a per-epoch checkpoint")

    p = add("denoise", "denoise one WAV file")
    p.add_argument("--in", dest="input")
    p.add_argument("--model")
    p.add_argument("--out")

    p = add("eval", "score a manifest, optionally through a model")
    p.add_argument("--manifest")
    p.add_argument("--model")
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.add_argument("--out")

    p = add("spectrogram", "render a track's fixed-size log-magnitude grid as PNG")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--floor-db", type=float, default=-100.0)
    p.add_argument("--chunk", type=int, default=0,
                   help="which 6.144 s chunk of a longer track to render (default 0)")
    return parser, subs


def parse_args(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.exit(EXIT_USAGE, f"--config: {exc}\n")
        except UsageError as exc:
            parser.exit(EXIT_USAGE, f"--config: {exc}\n")
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known - {"config"})
        if unknown:
            parser.exit(EXIT_USAGE, f"--config: unknown keys {unknown}\n")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) in (None, ""):
            flag = "--" + ("in" if name == "input" else name.replace("_", "-"))
            raise UsageError(f"{flag} is required")


def _require_dir(flag: str, path) -> None:
    if not Path(path).is_dir():
        raise UsageError(f"{flag}: directory not found: {path}")


def _require_file(flag: str, path) -> None:
    if not Path(path).is_file():
        raise UsageError(f"{flag}: file not found: {path}")


def cmd_mix(args) -> int:
    _require(args, "clean_dir", "noise_dir", "out_manifest")
    _require_dir("--clean-dir", args.clean_dir)
    _require_dir("--noise-dir", args.noise_dir)
    if not args.snrs:
        raise UsageError("--snrs: at least one SNR is required")
    manifest = build_manifest(args.clean_dir, args.noise_dir, args.snrs,
                              args.test_fraction, args.seed)
    write_manifest(args.out_manifest, manifest)
    if args.materialize_dir:
        out = Path(args.materialize_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, rec in enumerate(manifest.records):
            _, noisy = load_pair(rec, i, args.seed)
            name = f"{i:05d}_{rec.track_id.replace('/', '_')}_{rec.noise_type}_{rec.snr_db:g}dB.wav"
            write_wav(out / name, noisy)
    log.info("wrote %d records to %s", len(manifest), args.out_manifest)
    return EXIT_OK


def cmd_train(args) -> int:
    _require(args, "manifest", "out")
    _require_file("--manifest", args.manifest)
    if len(args.weights) != 3:
        raise UsageError("--weights: expected w_adv,w_l1,w_percep")
    try:
        weights = LossWeights(*args.weights)
        cfg = TrainConfig(epochs=args.epochs, seed=args.seed, lr=args.lr,
                          batch_size=args.batch_size, grid=args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    ckpt_dir = args.checkpoint_dir or str(out) + ".ckpt"
    log_path = args.log or str(out) + ".log"
    result = train(read_manifest(args.manifest), cfg, weights, checkpoint_dir=ckpt_dir,
                   log_path=log_path, resume_from=args.resume)
    save_checkpoint(result.params, out)
    return EXIT_OK


def _load_generator(path):
    try:
        return generator_from_params(load_checkpoint(path))
    except (KeyError, ValueError) as exc:
        raise VersionMismatch(f"{path}: {exc}") from exc


def cmd_denoise(args) -> int:
    _require(args, "input", "model", "out")
    _require_file("--in", args.input)
    _require_file("--model", args.model)
    noisy = read_wav(args.input)
    G, stft = _load_generator(args.model)
    write_wav(args.out, denoise_waveform(noisy, G, stft))
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args, "manifest", "out")
    _require_file("--manifest", args.manifest)
    model = stft = None
    if args.model:
        _require_file("--model", args.model)
        model, stft = _load_generator(args.model)
    split = None if args.split == "all" else args.split
    report = evaluate(read_manifest(args.manifest), model, seed=args.seed, split=split, stft=stft)
    report.write_csv(args.out)
    failed = [r for r in report.rows if not r.ok]
    if failed:
        print(f"tfdenoise eval: {len(failed)} of {len(report.rows)} rows not scored "
              f"(first: {failed[0].track}: {failed[0].error})", file=sys.stderr)
    return EXIT_OK


def cmd_spectrogram(args) -> int:
    _require(args, "input", "out")
    _require_file("--in", args.input)
    w = read_wav(args.input)
    max_len = max_track_len(StftConfig())
    chunks = split_track(w, max_len)
    if not 0 <= args.chunk < len(chunks):
        raise UsageError(f"--chunk: track has {len(chunks)} chunk(s), got {args.chunk}")
    if len(chunks) > 1:
        print(f"tfdenoise spectrogram: track spans {len(chunks)} chunks of at most "
              f"{max_len / SAMPLE_RATE:g} s; rendering chunk {args.chunk}", file=sys.stderr)
    img = spectrogram_image(chunks[args.chunk], args.floor_db,
                            offset_s=args.chunk * max_len / SAMPLE_RATE)
    render_png(img, args.out, args.floor_db)
    return EXIT_OK


COMMANDS = {"mix": cmd_mix, "train": cmd_train, "denoise": cmd_denoise,
            "eval": cmd_eval, "spectrogram": cmd_spectrogram}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tfdenoise {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedError as exc:
        print(f"tfdenoise {args.command}: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CorruptCheckpoint, VersionMismatch) as exc:
        print(f"tfdenoise {args.command}: model mismatch: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (EmptyCorpus, DenoiseError, OSError) as exc:
        print(f"tfdenoise {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
