"""Segment-based multiview depth estimation with graph cuts."""
from .config import EstimationConfig, InputError
from .energy import DepthLabelSpace, EnergyParams, Labeling, MultiviewData
from .geometry import CameraParams, Rig
from .pipeline import estimate_frames, estimate_parallel, run_sequence
from .segmentation import Segmentation, snic_segment

__all__ = [
    "CameraParams", "DepthLabelSpace", "EnergyParams", "EstimationConfig", "InputError",
    "Labeling", "MultiviewData", "Rig", "Segmentation", "estimate_frames", "estimate_parallel",
    "run_sequence", "snic_segment",
]
__version__ = "0.1.0"
