from .ops import MIN_CLASS_SIZE, SplitSpec, balance, ingest, load_png, split, split_sizes, to_unit_range
from .records import IMAGE_SHAPE, PROVENANCES, ImageRecord, Manifest
from .storage import FORMAT_VERSION, DatasetFileError, load_tensors, save_tensors
from .synth import ARCHETYPES, DEFAULT_CLASSES, render_sign, synth_signs

__all__ = [
    "ARCHETYPES",
    "DEFAULT_CLASSES",
    "FORMAT_VERSION",
    "IMAGE_SHAPE",
    "MIN_CLASS_SIZE",
    "PROVENANCES",
    "DatasetFileError",
    "ImageRecord",
    "Manifest",
    "SplitSpec",
    "balance",
    "ingest",
    "load_png",
    "load_tensors",
    "render_sign",
    "save_tensors",
    "split",
    "split_sizes",
    "synth_signs",
    "to_unit_range",
]
