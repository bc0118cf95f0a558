"""Numerical verification of almost contact metric 3-structures."""

from .errors import GeometryError
from .geometry import ManifoldModel, local
from .zoo import build, list_models

__all__ = ["GeometryError", "ManifoldModel", "build", "list_models", "local"]
