"""Box geometry, label files, dataset manifests and detection records.

Label files hold one box per line in the normalized five-field form used by
single-stage detector toolchains::

    0 cx cy w h

Manifests and detection files are JSON documents whose record field names are
``image_path, label_path, complexity_class`` and
``image_id, x0, y0, x1, y1, confidence`` respectively.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import PurePath
from typing import Iterable

from copyspace.errors import ArgumentError, ParseError, ValidationError

COPYSPACE = "copyspace"
LABEL_DECIMALS = 6
# slack for normalized boxes that touch the unit square after 6-decimal rounding
_UNIT_SLACK = 1e-6


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle, origin top-left, y growing downward."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        coords = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(c) for c in coords):
            raise ArgumentError(f"non-finite box coordinates {coords}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ArgumentError(f"box has non-positive area: {coords}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def aspect(self) -> float:
        return self.width / self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def within(self, width: float, height: float) -> bool:
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 <= width and self.y1 <= height

    def normalized(self, image_width: float, image_height: float) -> NormalizedBox:
        _check_dims(image_width, image_height)
        return NormalizedBox(
            cx=(self.x0 + self.x1) / 2 / image_width,
            cy=(self.y0 + self.y1) / 2 / image_height,
            w=(self.x1 - self.x0) / image_width,
            h=(self.y1 - self.y0) / image_height,
        )


@dataclass(frozen=True)
class NormalizedBox:
    """Center/size box in fractions of the image width and height."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ArgumentError(f"non-finite normalized box {vals}")
        if not (0 < self.w <= 1 + _UNIT_SLACK and 0 < self.h <= 1 + _UNIT_SLACK):
            raise ArgumentError(f"normalized size out of (0, 1]: w={self.w}, h={self.h}")
        for c, s in ((self.cx, self.w), (self.cy, self.h)):
            if c - s / 2 < -_UNIT_SLACK or c + s / 2 > 1 + _UNIT_SLACK:
                raise ArgumentError(f"normalized box leaves the unit square: {vals}")

    def to_pixels(self, image_width: float, image_height: float) -> BoundingBox:
        _check_dims(image_width, image_height)
        x0 = (self.cx - self.w / 2) * image_width
        x1 = (self.cx + self.w / 2) * image_width
        y0 = (self.cy - self.h / 2) * image_height
        y1 = (self.cy + self.h / 2) * image_height
        # rounding slack only; real excursions were rejected in __post_init__
        return BoundingBox(
            max(0.0, x0), max(0.0, y0), min(float(image_width), x1), min(float(image_height), y1)
        )


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    box: BoundingBox
    category: str = COPYSPACE


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise ArgumentError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True, order=True)
class ComplexityClass:
    """Image-level design difficulty; 1 is easiest, 4 the most cluttered."""

    level: int

    def __post_init__(self):
        if isinstance(self.level, bool) or not isinstance(self.level, int) or not 1 <= self.level <= 4:
            raise ArgumentError(f"complexity class must be an integer in 1..4, got {self.level!r}")

    def __int__(self):
        return self.level


ALL_CLASSES = tuple(ComplexityClass(k) for k in range(1, 5))


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    label_path: str
    complexity_class: ComplexityClass

    @property
    def image_id(self) -> str:
        """Identifier detections use to refer to this entry: the file stem."""
        return PurePath(self.image_path).stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen: set[str] = set()
        for i, e in enumerate(self.entries):
            if not e.image_path or not e.label_path:
                raise ValidationError(f"entry {i}: empty path")
            if e.image_path in seen:
                raise ValidationError(f"entry {i}: duplicate image_path {e.image_path!r}")
            seen.add(e.image_path)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def histogram(self) -> dict[int, int]:
        counts = Counter(e.complexity_class.level for e in self.entries)
        return dict(sorted(counts.items()))


def _check_dims(width: float, height: float) -> None:
    if not (width > 0 and height > 0):
        raise ArgumentError(f"image dimensions must be positive, got {width}x{height}")


def parse_label_file(
    text: str, image_width: float, image_height: float, image_id: str = ""
) -> list[GroundTruth]:
    """Parse ``0 cx cy w h`` lines into pixel-space ground truths.

    Blank lines are skipped; every other line must carry exactly five numeric
    fields with the class index ``0``. Errors name the 1-based line number.
    """
    _check_dims(image_width, image_height)
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        locus = f"line {lineno}"
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", locus)
        try:
            class_index = int(fields[0])
        except ValueError:
            raise ParseError(f"class index {fields[0]!r} is not an integer", locus) from None
        if class_index != 0:
            raise ParseError(f"class index must be 0 (single category), got {class_index}", locus)
        try:
            cx, cy, w, h = (float(f) for f in fields[1:])
        except ValueError:
            raise ParseError("non-numeric coordinate", locus) from None
        if not all(math.isfinite(v) and 0 < v <= 1 for v in (cx, cy, w, h)):
            raise ParseError(f"normalized fields must lie in (0, 1]: {fields[1:]}", locus)
        try:
            box = NormalizedBox(cx, cy, w, h).to_pixels(image_width, image_height)
        except ArgumentError as exc:
            raise ParseError(str(exc), locus) from None
        out.append(GroundTruth(image_id, box))
    return out


def write_label_file(gts: Iterable[GroundTruth], image_width: float, image_height: float) -> str:
    _check_dims(image_width, image_height)
    lines = []
    for gt in gts:
        if not gt.box.within(image_width, image_height):
            raise ArgumentError(f"box {gt.box.as_tuple()} exceeds image {image_width}x{image_height}")
        n = gt.box.normalized(image_width, image_height)
        lines.append(f"0 {n.cx:.{LABEL_DECIMALS}f} {n.cy:.{LABEL_DECIMALS}f} "
                     f"{n.w:.{LABEL_DECIMALS}f} {n.h:.{LABEL_DECIMALS}f}\n")
    return "".join(lines)


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid {what} document: {exc.msg}", f"line {exc.lineno}") from None


def _records(doc, key: str, what: str) -> list:
    if isinstance(doc, dict):
        doc = doc.get(key)
    if not isinstance(doc, list):
        raise ParseError(f"{what} document must hold a list under {key!r}")
    return doc


def load_manifest(text: str) -> DatasetManifest:
    entries = []
    for i, rec in enumerate(_records(_load_json(text, "manifest"), "entries", "manifest")):
        locus = f"entry {i}"
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", locus)
        try:
            image_path, label_path, level = rec["image_path"], rec["label_path"], rec["complexity_class"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", locus) from None
        if not isinstance(image_path, str) or not isinstance(label_path, str):
            raise ParseError("paths must be strings", locus)
        try:
            cls = ComplexityClass(level)
        except ArgumentError as exc:
            raise ParseError(str(exc), locus) from None
        entries.append(ManifestEntry(image_path, label_path, cls))
    return DatasetManifest(tuple(entries))


def dump_manifest(manifest: DatasetManifest) -> str:
    records = [
        {"image_path": e.image_path, "label_path": e.label_path, "complexity_class": e.complexity_class.level}
        for e in manifest.entries
    ]
    return json.dumps({"entries": records}, indent=1) + "\n"


def _detection_key(d: Detection):
    return (d.image_id, -d.confidence, d.box.y0, d.box.x0, d.box.y1, d.box.x1)


def write_detections(dets: Iterable[Detection]) -> str:
    """Serialize detections sorted by image id, then confidence descending."""
    records = []
    for d in sorted(dets, key=_detection_key):
        records.append({
            "image_id": d.image_id,
            "x0": float(d.box.x0),
            "y0": float(d.box.y0),
            "x1": float(d.box.x1),
            "y1": float(d.box.y1),
            "confidence": float(d.confidence),
        })
    return json.dumps({"detections": records}, indent=1, allow_nan=False) + "\n"


def parse_detections(text: str) -> list[Detection]:
    out = []
    for i, rec in enumerate(_records(_load_json(text, "detection"), "detections", "detection")):
        locus = f"record {i}"
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", locus)
        try:
            image_id = rec["image_id"]
            coords = [rec[k] for k in ("x0", "y0", "x1", "y1")]
            conf = rec["confidence"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", locus) from None
        if not isinstance(image_id, str):
            raise ParseError("image_id must be a string", locus)
        if not all(_is_number(v) for v in (*coords, conf)):
            raise ParseError("coordinates and confidence must be numbers", locus)
        try:
            out.append(Detection(image_id, BoundingBox(*map(float, coords)), float(conf)))
        except ArgumentError as exc:
            raise ParseError(str(exc), locus) from None
    return out


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)
