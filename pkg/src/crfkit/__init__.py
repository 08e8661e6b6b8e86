"""Centrifugal reference frames for rotation-invariant point-cloud geometry."""

from .cloud import PointCloud
from .errors import CRFError
from .frames import Frame, crf_basis, crf_transform, pcrf_basis, pcrf_transform

__all__ = ["PointCloud", "CRFError", "Frame", "crf_basis", "crf_transform", "pcrf_basis", "pcrf_transform"]
__version__ = "0.1.0"
