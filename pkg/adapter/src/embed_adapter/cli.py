"""Command line entry point.

    embed-adapter extract --model stub-pixels --patches DIR --out DIR \
        --angles 0:360:15 --batch 32 --stub

Exit codes match the rotalign convention: 0 success, 2 usage error, 3 data
or pipeline error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .encoders import DEFAULT_BATCH_SIZE, STUB_KINDS, load_model
from .errors import AdapterError
from .extract import extract, parse_angle_grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-adapter",
        description="Export per-angle embedding files for the rotalign toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="rotate patches, run the encoder, write EMB1 files")
    p.add_argument("--model", required=True, help="model id (preset name or stub-*)")
    p.add_argument("--patches", type=Path, required=True,
                   help="directory holding patch PNGs and their JSON index")
    p.add_argument("--angles", default="0:360:15", metavar="START:END:STEP")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH_SIZE)
    p.add_argument("--stub", action="store_true",
                   help="use the deterministic stub encoder regardless of model id")
    p.add_argument("--stub-kind", choices=STUB_KINDS, default="pixels")
    p.add_argument("--pooling", choices=["cls", "mean"], default="cls")
    p.add_argument("--rotation-augmented", action="store_true",
                   help="mark the exported model as rotation-augmented in its metadata")
    return parser


def _cmd_extract(args) -> int:
    if args.batch < 1:
        raise AdapterError("arguments", f"batch size must be positive, got {args.batch}")
    grid = parse_angle_grid(args.angles)
    handle = load_model(
        args.model,
        stub=args.stub,
        stub_kind=args.stub_kind,
        batch_size=args.batch,
        pooling=args.pooling,
    )
    fragment = extract(
        handle, args.patches, grid, args.out,
        rotation_augmented=args.rotation_augmented,
    )
    print(
        f"{len(fragment['embedding_paths'])} embedding files for "
        f"{handle.model_id} written to {args.out}"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "extract":
            return _cmd_extract(args)
        raise AdapterError("arguments", f"unknown command {args.command!r}")
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
