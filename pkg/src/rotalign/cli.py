"""Command line interface.

Subcommands compose the pipeline stages so each is independently scriptable:

    rotalign patches  IMAGE --out DIR        extract foreground patches
    rotalign synth    --out DIR --model ...  generate a synthetic experiment
    rotalign sweep    --manifest FILE        score every model across angles
    rotalign ttest    --manifest FILE --aggregates FILE
    rotalign heatmap  --alignment FILE --metric mknn

Exit codes: 0 success, 2 usage error, 3 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import patches as patchmod
from . import report
from .errors import GroupingError, RotalignError
from .protocol import (
    DEFAULT_K,
    aggregate,
    build_grid,
    evaluate_manifest,
)
from .stats import split_groups, two_sample_ttest
from .store import (
    EmbeddingSet,
    ManifestEntry,
    ModelManifest,
    load_manifest,
    save_manifest,
    write_embeddings,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _angle_spec(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"angle grid must look like start:end:step, got {text!r}"
        )
    try:
        start, end, step = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"angle grid parts must be integers: {text!r}") from None
    return start, end, step


def _formats(text: str) -> set[str]:
    items = {p.strip() for p in text.split(",") if p.strip()}
    allowed = {"csv", "json", "svg"}
    bad = items - allowed
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown formats {sorted(bad)}; choose from {sorted(allowed)}"
        )
    if not items:
        raise argparse.ArgumentTypeError("at least one format is required")
    return items


def _model_spec(text: str) -> tuple[str, float, bool]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(
            f"model spec must be NAME:SIGMA[:aug|:plain], got {text!r}"
        )
    name = parts[0]
    if not name:
        raise argparse.ArgumentTypeError("model name must be nonempty")
    try:
        sigma = float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sigma in model spec {text!r}") from None
    if sigma < 0:
        raise argparse.ArgumentTypeError("sigma must be nonnegative")
    augmented = False
    if len(parts) == 3:
        if parts[2] not in ("aug", "plain"):
            raise argparse.ArgumentTypeError(
                f"model flag must be 'aug' or 'plain', got {parts[2]!r}"
            )
        augmented = parts[2] == "aug"
    return name, sigma, augmented


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotalign",
        description="Measure rotational invariance of learned image representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("patches", help="extract foreground patches from an RGB image")
    p.add_argument("image", type=Path, help="input PNG image")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--patch-size", type=_positive_int, default=patchmod.DEFAULT_PATCH_SIZE)
    p.add_argument("--min-foreground", type=_fraction, default=patchmod.DEFAULT_MIN_FOREGROUND)
    p.add_argument("--regions", type=_positive_int, default=patchmod.DEFAULT_REGION_COUNT,
                   help="number of largest regions to tile")
    p.add_argument("--saturation-threshold", type=_fraction, default=None,
                   help="fixed saturation threshold instead of Otsu")

    p = sub.add_parser("synth", help="generate a synthetic experiment (manifest + embeddings)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--model", dest="models", type=_model_spec, action="append", required=True,
                   metavar="NAME:SIGMA[:aug|:plain]",
                   help="synthetic model: noise level and augmentation flag (repeatable)")
    p.add_argument("--n", type=_positive_int, default=500, help="vectors per set")
    p.add_argument("--dim", type=_positive_int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--angles", type=_angle_spec, default=(0, 360, 15), metavar="START:END:STEP")

    p = sub.add_parser("sweep", help="score every manifest model across the rotation grid")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--angles", type=_angle_spec, default=(0, 360, 15), metavar="START:END:STEP")
    p.add_argument("--ttest", choices=["student", "welch"], default="student")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--formats", type=_formats, default={"csv", "json"},
                   metavar="csv,json,svg")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker cap (also settable via ROTALIGN_THREADS)")

    p = sub.add_parser("ttest", help="compare augmented vs plain models from an aggregates CSV")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--aggregates", type=Path, required=True, help="aggregates.csv from sweep")
    p.add_argument("--metric", choices=["mknn", "cosine", "both"], default="both")
    p.add_argument("--variant", choices=["student", "welch"], default="student")
    p.add_argument("--out", type=Path, default=None, help="JSON output file (default stdout)")

    p = sub.add_parser("heatmap", help="render a model x angle heatmap from alignment.csv")
    p.add_argument("--alignment", type=Path, required=True)
    p.add_argument("--metric", choices=["mknn", "cosine"], required=True)
    p.add_argument("--out", type=Path, required=True, help="SVG output file")

    return parser


def _cmd_patches(args) -> int:
    image = patchmod.load_image(args.image)
    mask = patchmod.segment_foreground(image, threshold=args.saturation_threshold)
    boxes = patchmod.largest_regions(mask, count=args.regions)
    extracted = patchmod.extract_patches(
        image, mask, boxes,
        patch_size=args.patch_size,
        min_foreground=args.min_foreground,
    )
    index_path = patchmod.save_patches(
        extracted, args.out, args.image.stem,
        patch_size=args.patch_size,
        min_foreground=args.min_foreground,
    )
    print(f"{len(extracted)} patches written to {args.out} (index: {index_path.name})")
    return EXIT_OK


def _cmd_synth(args) -> int:
    start, end, step = args.angles
    grid = build_grid(start, end, step)
    args.out.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, (name, sigma, augmented) in enumerate(args.models):
        rng = np.random.Generator(np.random.PCG64([args.seed, idx]))
        base = rng.standard_normal((args.n, args.dim)).astype(np.float32)
        paths = {}
        for angle in grid.angles:
            if angle == grid.control_angle:
                vectors = base
            else:
                noise_rng = np.random.Generator(np.random.PCG64([args.seed, idx, angle]))
                noise = noise_rng.standard_normal((args.n, args.dim)).astype(np.float32)
                vectors = base + noise * np.float32(sigma)
            out_path = args.out / f"{name}_angle{angle}.emb"
            write_embeddings(
                EmbeddingSet(
                    vectors,
                    model_name=name,
                    angle_degrees=angle,
                    rotation_augmented=augmented,
                ),
                out_path,
            )
            paths[angle] = out_path
        entries.append(
            ManifestEntry(
                model_name=name, rotation_augmented=augmented, embedding_paths=paths
            )
        )
    manifest_path = args.out / "manifest.json"
    save_manifest(ModelManifest(entries), manifest_path)
    print(
        f"{len(entries)} synthetic models x {len(grid.angles)} angles "
        f"written to {args.out} (manifest: {manifest_path.name})"
    )
    return EXIT_OK


def _ttest_payload(manifest, aggregates, metric: str, variant: str) -> dict:
    try:
        augmented, plain = split_groups(manifest, aggregates, metric)
        result = two_sample_ttest(augmented, plain, variant=variant)
        return result.to_dict(metric=metric)
    except (GroupingError, ValueError) as exc:
        return {"metric": metric, "variant": variant, "skipped": str(exc)}


def _cmd_sweep(args) -> int:
    manifest = load_manifest(args.manifest)
    start, end, step = args.angles
    grid = build_grid(start, end, step)
    table = evaluate_manifest(manifest, grid, k=args.k, max_workers=args.threads)
    aggregates = aggregate(table)
    flags = {e.model_name: e.rotation_augmented for e in manifest.entries}

    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in args.formats:
        report.write_alignment_csv(table, args.out / "alignment.csv")
        report.write_aggregates_csv(aggregates, flags, args.out / "aggregates.csv")
        written += ["alignment.csv", "aggregates.csv"]
    if "json" in args.formats:
        report.write_alignment_json(table, args.out / "alignment.json")
        written.append("alignment.json")
    results = [
        _ttest_payload(manifest, aggregates, metric, args.ttest)
        for metric in ("mknn", "cosine")
    ]
    report.write_ttest_json(results, args.out / "ttest.json")
    written.append("ttest.json")
    if "svg" in args.formats:
        report.render_heatmap(table, "mknn", args.out / "heatmap_mknn.svg")
        report.render_heatmap(table, "cosine", args.out / "heatmap_cosine.svg")
        written += ["heatmap_mknn.svg", "heatmap_cosine.svg"]
    print(
        f"{len(manifest.entries)} models x {len(grid.rotated)} angles scored "
        f"(k={args.k}); wrote {', '.join(written)} to {args.out}"
    )
    return EXIT_OK


def _cmd_ttest(args) -> int:
    manifest = load_manifest(args.manifest)
    aggregates, _ = report.read_aggregates_csv(args.aggregates)
    metrics = ["mknn", "cosine"] if args.metric == "both" else [args.metric]
    results = [
        _ttest_payload(manifest, aggregates, metric, args.variant)
        for metric in metrics
    ]
    text = json.dumps(results, indent=2, sort_keys=True)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    table = report.read_alignment_csv(args.alignment)
    report.render_heatmap(table, args.metric, args.out)
    print(f"heatmap written to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "patches": _cmd_patches,
    "synth": _cmd_synth,
    "sweep": _cmd_sweep,
    "ttest": _cmd_ttest,
    "heatmap": _cmd_heatmap,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (RotalignError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
