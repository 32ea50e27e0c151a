"""Motion segmentation of 2D feature trajectories with local affine atoms.

Pipeline: affine atoms -> multicut into 2C fine models -> epipolar
affinity and spectral merge into C motions -> weighted randomized voting.
"""

from .atoms import Atom, AtomConstructionConfig, build_atoms
from .data import Labeling, TrajectorySet
from .dataio import (
    NoiseSpec,
    SceneSpec,
    add_noise,
    load_labeling,
    load_trajectories,
    misclassification_error,
    save_labeling,
    save_trajectories,
    standard_suite,
    synth_scene,
)
from .errors import LaavError
from .pipeline import PipelineConfig, SegmentationResult, segment

__all__ = [
    "Atom",
    "AtomConstructionConfig",
    "Labeling",
    "LaavError",
    "NoiseSpec",
    "PipelineConfig",
    "SceneSpec",
    "SegmentationResult",
    "TrajectorySet",
    "add_noise",
    "build_atoms",
    "load_labeling",
    "load_trajectories",
    "misclassification_error",
    "save_labeling",
    "save_trajectories",
    "segment",
    "standard_suite",
    "synth_scene",
]
__version__ = "0.1.0"
