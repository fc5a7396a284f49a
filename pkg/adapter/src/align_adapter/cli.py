"""Command-line front end: ``phoneme-align --audio-dir DIR --out FILE``."""

from __future__ import annotations

import argparse
import logging
import sys

from .adapter import AdapterConfig, align_corpus
from .recognizer import BUILTIN_SPECTRAL, DEFAULT_MODEL, AdapterDependencyError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phoneme-align",
        description="Convert WAV recordings into a phoneme alignment TSV.",
    )
    parser.add_argument("--audio-dir", required=True, help="directory of .wav files")
    parser.add_argument("--out", required=True, help="output alignment TSV path")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=f"recognizer: a transformers model id, or {BUILTIN_SPECTRAL!r} "
        "for the offline spectral labeler",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--min-duration", type=float, default=0.02,
        help="intervals shorter than this merge into a neighbor (seconds)",
    )
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    cfg = AdapterConfig(
        audio_dir=args.audio_dir,
        out_path=args.out,
        model=args.model,
        device=args.device,
        min_duration=args.min_duration,
    )
    try:
        align_corpus(cfg)
    except AdapterDependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
