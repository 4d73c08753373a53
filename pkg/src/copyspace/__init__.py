"""Copyspace detection: find regions of an image where overlaid text reads well."""

from copyspace.annotations import (
    BoundingBox,
    ComplexityClass,
    DatasetManifest,
    Detection,
    GroundTruth,
    NormalizedBox,
    load_manifest,
    parse_detections,
    parse_label_file,
    write_detections,
    write_label_file,
)
from copyspace.detector import DetectionSet, DetectParams, ScoredBox, detect, parameter_sweep
from copyspace.metrics import (
    EvalReport,
    average_precision,
    evaluate_dataset,
    iou,
    map_range,
    match_greedy,
    mean_matched_iou,
)
from copyspace.synth import SynthConfig, synth_dataset, synth_sample

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "ComplexityClass", "DatasetManifest", "Detection", "GroundTruth", "NormalizedBox",
    "load_manifest", "parse_detections", "parse_label_file", "write_detections", "write_label_file",
    "DetectionSet", "DetectParams", "ScoredBox", "detect", "parameter_sweep",
    "EvalReport", "average_precision", "evaluate_dataset", "iou", "map_range", "match_greedy",
    "mean_matched_iou", "SynthConfig", "synth_dataset", "synth_sample",
]
