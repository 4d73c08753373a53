"""Seeded synthetic copyspace datasets built from decorated polygons.

A sample is a flat background with one planted clear rectangle (the ground
truth copyspace) and a class-dependent number of random polygons placed
around it as clutter. Polygons may carry gradient fills and strokes.

Seeding
-------
``synth_dataset`` derives the seed of sample ``index`` of class ``c`` as::

    splitmix64(seed ^ splitmix64((c << 32) | index))

and ``synth_sample`` drives a numpy ``PCG64`` generator from that 64-bit
seed. All geometry is integer and rasterized by Pillow, so corpora are
bit-identical across runs, platforms and worker counts.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image, ImageDraw

from copyspace.annotations import (
    BoundingBox,
    ComplexityClass,
    DatasetManifest,
    GroundTruth,
    ManifestEntry,
    dump_manifest,
    write_label_file,
)
from copyspace.errors import ArgumentError, GenerationError, ParseError, StorageError

MASK64 = (1 << 64) - 1
MAX_ATTEMPTS = 1000

DEFAULT_PALETTE = (
    (245, 245, 240), (30, 30, 35), (200, 60, 50), (40, 110, 190), (240, 190, 40),
    (60, 160, 90), (150, 80, 170), (250, 130, 60), (120, 200, 210), (90, 90, 100),
)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def sample_seed(seed: int, level: int, index: int) -> int:
    return splitmix64((seed & MASK64) ^ splitmix64(((level & 0xFFFFFFFF) << 32) | (index & 0xFFFFFFFF)))


def _default_counts() -> dict[int, tuple[int, int]]:
    return {1: (3, 6), 2: (10, 16), 3: (22, 32), 4: (45, 60)}


def _default_areas() -> dict[int, tuple[float, float]]:
    # busier designs leave less room for copy
    return {1: (0.50, 0.80), 2: (0.35, 0.50), 3: (0.10, 0.15), 4: (0.08, 0.12)}


@dataclass(frozen=True)
class SynthConfig:
    canvas_width: int = 512
    canvas_height: int = 512
    # (min_frac, max_frac) of canvas area, or a per-class mapping of such pairs
    clear_rect_area_range: tuple[float, float] | Mapping[int, tuple[float, float]] = field(
        default_factory=_default_areas
    )
    clear_rect_aspect_range: tuple[float, float] = (0.5, 3.0)
    polygons_per_class: Mapping[int, tuple[int, int]] = field(default_factory=_default_counts)
    vertex_range: tuple[int, int] = (3, 8)
    # polygon circumradius as a fraction of min(canvas_width, canvas_height)
    polygon_radius_range: tuple[float, float] = (0.04, 0.16)
    palette: tuple[tuple[int, int, int], ...] = DEFAULT_PALETTE
    stroke_probability: float = 0.3
    gradient_probability: float = 0.3
    pattern_probability: float = 0.5
    allow_overlap_clear: bool = False
    # empty pixels kept between clutter and the clear rectangle
    clear_gap: int = 2

    def __post_init__(self):
        counts = {int(k): tuple(int(x) for x in v) for k, v in dict(self.polygons_per_class).items()}
        object.__setattr__(self, "polygons_per_class", counts)
        object.__setattr__(self, "palette", tuple(tuple(int(c) for c in rgb) for rgb in self.palette))
        for name in ("clear_rect_aspect_range", "vertex_range", "polygon_radius_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        areas = self.clear_rect_area_range
        if isinstance(areas, Mapping):
            areas = {int(k): tuple(float(x) for x in v) for k, v in areas.items()}
        else:
            areas = tuple(float(x) for x in areas)
        object.__setattr__(self, "clear_rect_area_range", areas)

        def check(ok, msg):
            if not ok:
                raise ArgumentError(msg)

        check(self.canvas_width >= 3 and self.canvas_height >= 3, "canvas must be at least 3x3")
        if isinstance(areas, dict):
            check(sorted(areas) == [1, 2, 3, 4], "per-class clear_rect_area_range needs classes 1..4")
        for lo, hi in (areas.values() if isinstance(areas, dict) else [areas]):
            check(0 < lo <= hi <= 1, "clear_rect_area_range must satisfy 0 < min <= max <= 1")
        lo, hi = self.clear_rect_aspect_range
        check(0 < lo <= hi, "clear_rect_aspect_range must satisfy 0 < min <= max")
        lo, hi = self.polygon_radius_range
        check(0 < lo <= hi, "polygon_radius_range must satisfy 0 < min <= max")
        check(self.vertex_range[0] == 3 and self.vertex_range[1] >= 3, "vertex_range must be (3, max_vertices)")
        check(sorted(counts) == [1, 2, 3, 4], "polygons_per_class needs classes 1..4")
        for k, (a, b) in counts.items():
            check(0 <= a <= b, f"polygon count range for class {k} is invalid")
        for k in (1, 2, 3):
            a, b = counts[k]
            c, d = counts[k + 1]
            check(a < c and b < d, "polygon counts must strictly increase with class")
        check(len(self.palette) >= 2, "palette needs at least two colors")
        check(all(len(c) == 3 and all(0 <= v <= 255 for v in c) for c in self.palette),
              "palette entries must be 8-bit RGB triples")
        check(all(0 <= p <= 1 for p in (self.stroke_probability, self.gradient_probability, self.pattern_probability)),
              "probabilities must lie in [0, 1]")
        check(self.gradient_probability + self.pattern_probability <= 1,
              "gradient_probability + pattern_probability must not exceed 1")
        check(self.clear_gap >= 0, "clear_gap must be >= 0")

    def area_range(self, level: int) -> tuple[float, float]:
        areas = self.clear_rect_area_range
        return areas[level] if isinstance(areas, dict) else areas

    def to_dict(self) -> dict:
        areas = self.clear_rect_area_range
        return {
            "canvas_width": self.canvas_width,
            "canvas_height": self.canvas_height,
            "clear_rect_area_range": (
                {str(k): list(v) for k, v in sorted(areas.items())} if isinstance(areas, dict) else list(areas)
            ),
            "clear_rect_aspect_range": list(self.clear_rect_aspect_range),
            "polygons_per_class": {str(k): list(v) for k, v in sorted(self.polygons_per_class.items())},
            "vertex_range": list(self.vertex_range),
            "polygon_radius_range": list(self.polygon_radius_range),
            "palette": [list(c) for c in self.palette],
            "stroke_probability": self.stroke_probability,
            "gradient_probability": self.gradient_probability,
            "pattern_probability": self.pattern_probability,
            "allow_overlap_clear": self.allow_overlap_clear,
            "clear_gap": self.clear_gap,
        }


def load_config(text: str) -> SynthConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid synth config: {exc.msg}", f"line {exc.lineno}") from None
    if not isinstance(data, dict):
        raise ParseError("synth config must be an object")
    try:
        return SynthConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None


@dataclass(frozen=True)
class SynthSample:
    image: np.ndarray  # (H, W, 3) uint8
    ground_truth: GroundTruth
    complexity_class: ComplexityClass
    seed: int
    background: tuple[int, int, int] = (0, 0, 0)

    def float_image(self) -> np.ndarray:
        return self.image.astype(np.float64) / 255.0

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.image).save(buf, format="PNG")
        return buf.getvalue()


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _clear_rect(rng: np.random.Generator, cfg: SynthConfig, level: int) -> tuple[int, int, int, int]:
    W, H = cfg.canvas_width, cfg.canvas_height
    for _ in range(MAX_ATTEMPTS):
        area = rng.uniform(*cfg.area_range(level)) * W * H
        lo, hi = cfg.clear_rect_aspect_range
        aspect = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        w = int(round(math.sqrt(area * aspect)))
        h = int(round(math.sqrt(area / aspect)))
        if 1 <= w <= W and 1 <= h <= H:
            x0 = int(rng.integers(0, W - w + 1))
            y0 = int(rng.integers(0, H - h + 1))
            return x0, y0, x0 + w, y0 + h
    raise GenerationError("could not place the clear rectangle on the canvas")


def _polygon(rng: np.random.Generator, cfg: SynthConfig) -> list[tuple[int, int]]:
    W, H = cfg.canvas_width, cfg.canvas_height
    n = int(rng.integers(cfg.vertex_range[0], cfg.vertex_range[1] + 1))
    r = rng.uniform(*cfg.polygon_radius_range) * min(W, H)
    cx, cy = rng.uniform(0, W), rng.uniform(0, H)
    # sorted angles give a star-shaped, hence simple, polygon
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    radii = r * rng.uniform(0.5, 1.0, n)
    return [(int(round(cx + rr * math.cos(a))), int(round(cy + rr * math.sin(a)))) for a, rr in zip(angles, radii)]


def _gradient(rng, size, c0, c1) -> Image.Image:
    """Linear ramp from ``c0`` to ``c1`` along a random direction."""
    w, h = size
    theta = rng.uniform(0, 2 * math.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    t = xx * math.cos(theta) + yy * math.sin(theta)
    t = (t - t.min()) / max(t.max() - t.min(), 1)
    c0, c1 = np.array(c0, dtype=np.float64), np.array(c1, dtype=np.float64)
    ramp = c0 + (c1 - c0) * t[..., None]
    return Image.fromarray(np.round(ramp).astype(np.uint8))


def _pattern(rng, size, c0, c1) -> Image.Image:
    """Stripes, diagonal stripes, a checkerboard or dither in ``c0`` and ``c1``."""
    w, h = size
    period = int(rng.integers(2, 9))
    yy, xx = np.mgrid[0:h, 0:w]
    kind = int(rng.integers(4))
    if kind == 3:
        # per-pixel dither between the two colors
        on = rng.integers(0, 2, size=(h, w))
    elif kind == 0:
        on = (xx // period) % 2
    elif kind == 1:
        on = ((xx + yy) // period) % 2
    else:
        on = (xx // period + yy // period) % 2
    out = np.where(on[..., None] == 1, np.array(c1, dtype=np.uint8), np.array(c0, dtype=np.uint8))
    return Image.fromarray(out.astype(np.uint8))


def synth_sample(seed: int, level: int | ComplexityClass, config: SynthConfig | None = None) -> SynthSample:
    """Render one sample; a pure function of ``(seed, level, config)``."""
    cfg = config or SynthConfig()
    cls = level if isinstance(level, ComplexityClass) else ComplexityClass(level)
    seed &= MASK64
    rng = np.random.Generator(np.random.PCG64(seed))
    W, H = cfg.canvas_width, cfg.canvas_height

    background = _pick(rng, cfg.palette)
    rect = _clear_rect(rng, cfg, cls.level)
    lo, hi = cfg.polygons_per_class[cls.level]
    n_polys = int(rng.integers(lo, hi + 1))

    canvas = Image.new("RGB", (W, H), background)
    draw = ImageDraw.Draw(canvas)
    others = [c for c in cfg.palette if c != background]
    gx0, gy0, gx1, gy1 = rect

    for _ in range(n_polys):
        for _attempt in range(MAX_ATTEMPTS):
            pts = _polygon(rng, cfg)
            stroke = int(rng.integers(1, 5)) if rng.random() < cfg.stroke_probability else 0
            if cfg.allow_overlap_clear:
                break
            pad = stroke + cfg.clear_gap
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            # reject if the padded polygon bbox touches the clear rect
            if (max(xs) + pad < gx0 or min(xs) - pad >= gx1
                    or max(ys) + pad < gy0 or min(ys) - pad >= gy1):
                break
        else:
            raise GenerationError(
                f"could not place polygon clear of the copyspace after {MAX_ATTEMPTS} attempts; config too dense"
            )
        fill = _pick(rng, others)
        u = rng.random()
        if u < cfg.pattern_probability + cfg.gradient_probability:
            texture = _pattern if u < cfg.pattern_probability else _gradient
            bx0, by0 = min(p[0] for p in pts), min(p[1] for p in pts)
            size = (max(p[0] for p in pts) - bx0 + 1, max(p[1] for p in pts) - by0 + 1)
            mask = Image.new("L", size, 0)
            ImageDraw.Draw(mask).polygon([(x - bx0, y - by0) for x, y in pts], fill=255)
            second = _pick(rng, [c for c in others if c != fill] or others)
            canvas.paste(texture(rng, size, fill, second), (bx0, by0), mask)
        else:
            draw.polygon(pts, fill=fill)
        if stroke:
            draw.line(pts + [pts[0]], fill=_pick(rng, cfg.palette), width=stroke)

    gt = GroundTruth("", BoundingBox(*map(float, rect)))
    return SynthSample(np.asarray(canvas, dtype=np.uint8).copy(), gt, cls, seed, background)


def sample_name(level: int, index: int) -> str:
    return f"{level}_{index}"


def synth_dataset(
    seed: int,
    counts: Mapping[int, int],
    config: SynthConfig | None = None,
    output_root: str | Path = ".",
    workers: int = 1,
) -> DatasetManifest:
    """Write a dataset under ``output_root`` and return its manifest.

    Layout: ``images/<class>_<index>.png``, ``labels/<class>_<index>.txt`` and
    ``manifest.json`` with paths relative to ``output_root``.
    """
    cfg = config or SynthConfig()
    jobs = []
    for level, n in sorted(counts.items()):
        ComplexityClass(int(level))
        if int(n) < 0:
            raise ArgumentError(f"negative count for class {level}")
        jobs.extend((int(level), i) for i in range(int(n)))

    root = Path(output_root)
    try:
        (root / "images").mkdir(parents=True, exist_ok=True)
        (root / "labels").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create output directories under {root}: {exc}") from None

    def build(job):
        level, index = job
        name = sample_name(level, index)
        s = synth_sample(sample_seed(seed, level, index), level, cfg)
        label = write_label_file([s.ground_truth], cfg.canvas_width, cfg.canvas_height)
        try:
            (root / "images" / f"{name}.png").write_bytes(s.png_bytes())
            (root / "labels" / f"{name}.txt").write_text(label)
        except OSError as exc:
            raise StorageError(f"cannot write sample {name}: {exc}") from None
        return ManifestEntry(f"images/{name}.png", f"labels/{name}.txt", s.complexity_class)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            entries = list(pool.map(build, jobs))
    else:
        entries = [build(j) for j in jobs]

    manifest = DatasetManifest(tuple(entries))
    try:
        (root / "manifest.json").write_text(dump_manifest(manifest))
    except OSError as exc:
        raise StorageError(f"cannot write manifest: {exc}") from None
    return manifest
