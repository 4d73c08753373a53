"""Loading a manifest's ground truths from disk."""

from __future__ import annotations

from pathlib import Path

from copyspace.annotations import DatasetManifest, GroundTruth, load_manifest, parse_label_file
from copyspace.errors import ParseError
from copyspace.imaging import image_size


def read_manifest(path: str | Path) -> tuple[DatasetManifest, Path]:
    """Parse a manifest file; returns it with the directory its paths are relative to."""
    path = Path(path)
    return load_manifest(path.read_text()), path.parent


def load_ground_truths(manifest: DatasetManifest, root: str | Path) -> dict[str, list[GroundTruth]]:
    """Ground truths per image id; label files are denormalized with each image's size."""
    root = Path(root)
    out = {}
    for entry in manifest:
        width, height = image_size(root / entry.image_path)
        label_path = root / entry.label_path
        try:
            out[entry.image_id] = parse_label_file(label_path.read_text(), width, height, entry.image_id)
        except ParseError as exc:
            raise ParseError(str(exc), str(label_path)) from None
    return out
