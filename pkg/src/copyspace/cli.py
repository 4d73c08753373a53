"""Command-line entry point: ``copyspace {detect,eval,synth,render,sweep}``.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 no candidates,
5 undefined metric.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from copyspace.annotations import parse_detections, write_detections
from copyspace.dataset import load_ground_truths, read_manifest
from copyspace.detector import DetectParams, detect, load_grid, load_params, parameter_sweep, variant_grid
from copyspace.errors import (
    ArgumentError,
    CopyspaceError,
    DecodeError,
    EmptyCandidateError,
    GenerationError,
    NoCandidatesError,
    ParseError,
    StorageError,
    UndefinedMetricError,
    ValidationError,
)
from copyspace.imaging import complexity_map, encode_png, heatmap_png, read_image, to_luma
from copyspace.metrics import COCO_THRESHOLDS, evaluate_dataset, parse_range
from copyspace.render import DesignSpec, draw_overlay, generate_variations
from copyspace.synth import SynthConfig, load_config, synth_dataset

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NO_CANDIDATES, EXIT_UNDEFINED = 0, 2, 3, 4, 5


def _write(path: Path, data: bytes | str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            path.write_text(data)
        else:
            path.write_bytes(data)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror or exc}") from None


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _counts(text: str) -> dict[int, int]:
    out = {}
    try:
        for part in text.split(","):
            k, v = part.split("=")
            out[int(k)] = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected CLASS=COUNT pairs like 1=169,2=8, got {text!r}") from None
    return out


def _base_params(args) -> DetectParams:
    params = load_params(_read_text(args.params)) if args.params else DetectParams()
    overrides = {
        "top_k": getattr(args, "top_k", None),
        "max_complexity": getattr(args, "max_complexity", None),
        "aspect_ratios": getattr(args, "aspects", None),
        "min_area_frac": getattr(args, "min_area_frac", None),
        "nms_iou": getattr(args, "nms_iou", None),
    }
    return replace(params, **{k: v for k, v in overrides.items() if v is not None})


def cmd_detect(args) -> int:
    params = _base_params(args)
    out = Path(args.out)
    stems = [Path(p).stem for p in args.images]
    if len(set(stems)) != len(stems):
        raise ArgumentError("input images must have distinct file names (they become image ids)")

    def run(path: str):
        img = read_image(path)
        gray = to_luma(img)
        image_id = Path(path).stem
        ds = detect(gray, params, image_id)
        _write(out / f"{image_id}.detections.json", ds.to_json())
        if not args.no_overlay:
            _write(out / f"{image_id}_overlay.png", encode_png(draw_overlay(img, dets=ds.detections())))
        if args.emit_heatmap:
            _write(out / f"{image_id}_heatmap.png", heatmap_png(complexity_map(gray)))
        return ds

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            sets = list(pool.map(run, args.images))
    else:
        sets = [run(p) for p in args.images]
    dets = [d for ds in sets for d in ds.detections()]
    _write(out / "detections.json", write_detections(dets))
    for ds in sets:
        print(f"{ds.image_id}: {len(ds.boxes)} candidate(s)")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest, root = read_manifest(args.manifest)
    dets = parse_detections(_read_text(args.detections))
    gts = load_ground_truths(manifest, root)
    thresholds = parse_range(args.range) if args.range else COCO_THRESHOLDS
    report = evaluate_dataset(manifest, dets, gts, args.iou_threshold, thresholds)
    report_path = Path(args.report)
    table_path = report_path.with_suffix(".txt")
    if table_path == report_path:
        table_path = report_path.with_name(report_path.name + ".table.txt")
    _write(report_path, report.to_json())
    _write(table_path, report.to_table())
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    config = load_config(_read_text(args.config)) if args.config else SynthConfig()
    manifest = synth_dataset(args.seed, args.counts, config, args.out, workers=args.workers)
    hist = ", ".join(f"{k}: {v}" for k, v in manifest.histogram().items())
    print(f"wrote {len(manifest)} samples to {args.out} ({hist})")
    return EXIT_OK


def cmd_render(args) -> int:
    params = _base_params(args)
    img = read_image(args.image)
    spec = DesignSpec(copy_text=args.text, panel_opacity=args.opacity)
    result = generate_variations(img, spec, variant_grid(params, args.variants), Path(args.image).stem)
    out = Path(args.out)
    for d in result.designs:
        _write(out / f"design_{d.grid_index}.png", encode_png(d.image))
    for i in result.empty:
        print(f"variant {i}: no candidate copyspace", file=sys.stderr)
    print(f"rendered {len(result.designs)} design(s) to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = load_grid(_read_text(args.grid))
    img = read_image(args.image)
    image_id = Path(args.image).stem
    out = Path(args.out)
    sets = parameter_sweep(to_luma(img), grid, image_id)
    for i, ds in enumerate(sets):
        _write(out / f"sweep_{i}.json", ds.to_json())
        _write(out / f"sweep_{i}_overlay.png", encode_png(draw_overlay(img, dets=ds.detections())))
        print(f"row {i}: {len(ds.boxes)} candidate(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copyspace", description="Copyspace detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def detector_flags(p):
        p.add_argument("--params", help="JSON file with DetectParams fields")
        p.add_argument("--top-k", type=int)
        p.add_argument("--max-complexity", type=float)
        p.add_argument("--aspects", type=_csv_floats, help="comma-separated w/h ratios")
        p.add_argument("--min-area-frac", type=float)
        p.add_argument("--nms-iou", type=float)

    p = sub.add_parser("detect", help="detect copyspace in images")
    p.add_argument("images", nargs="+")
    detector_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-heatmap", action="store_true")
    p.add_argument("--no-overlay", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="evaluate detections against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--range", help="start:stop:step, default 0.5:0.95:0.05")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--counts", type=_counts, required=True, help="e.g. 1=169,2=8,3=7,4=7")
    p.add_argument("--config", help="JSON file with SynthConfig fields")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="render design variations into detected copyspace")
    p.add_argument("image")
    p.add_argument("--text", required=True)
    detector_flags(p)
    p.add_argument("--variants", type=int, default=4)
    p.add_argument("--opacity", type=float, default=0.6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", help="run a parameter grid on one image")
    p.add_argument("image")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


_EXIT_CODES = (
    (ArgumentError, EXIT_USAGE),
    ((ParseError, ValidationError, DecodeError, GenerationError, StorageError), EXIT_INPUT),
    ((EmptyCandidateError, NoCandidatesError), EXIT_NO_CANDIDATES),
    (UndefinedMetricError, EXIT_UNDEFINED),
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CopyspaceError as exc:
        for kind, code in _EXIT_CODES:
            if isinstance(exc, kind):
                print(f"copyspace: error: {exc}", file=sys.stderr)
                return code
        raise
    except OSError as exc:
        print(f"copyspace: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
