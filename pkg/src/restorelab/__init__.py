"""restorelab: config-driven, content-aware image restoration with layered
scene editing and a confidence-score evaluation harness."""

from .geometry import BBox, BinaryMask, ImageBuffer
from .isolate import Scene, SceneObject

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BinaryMask",
    "ImageBuffer",
    "Scene",
    "SceneObject",
    "__version__",
]
