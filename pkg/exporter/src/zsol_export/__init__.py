"""Embedding and annotation exporter for the zsol localization toolkit."""

from .datasets import ImageRecord, box_center, load_carpk, load_dataset, load_fsc147, load_shanghaitech
from .encoders import ClipEncoder, StubEncoder, TextRecord, build_prompt, make_encoder
from .errors import ExportError
from .export import ExportJob, export_image, export_points, export_text, run_export
from .windows import plan

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "ExportError",
    "ExportJob",
    "ImageRecord",
    "StubEncoder",
    "TextRecord",
    "box_center",
    "build_prompt",
    "export_image",
    "export_points",
    "export_text",
    "load_carpk",
    "load_dataset",
    "load_fsc147",
    "load_shanghaitech",
    "make_encoder",
    "plan",
    "run_export",
]
