"""Containers shared by every stage: trajectories in, labelings out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATOM = "atom"
RV = "rv"
UNLABELED = -1


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """K feature tracks over L frames.

    ``points`` has shape ``(K, L, 2)``. ``num_motions`` is the number of
    independent motions C (0 when unknown). ``ground_truth`` holds optional
    per-feature motion labels in ``[0, C)``.
    """

    points: np.ndarray
    num_motions: int = 0
    ground_truth: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise ValueError(f"points must have shape (K, L, 2), got {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 2:
            raise ValueError(f"need K >= 1 and L >= 2, got K={pts.shape[0]}, L={pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory coordinates must be finite")
        if self.num_motions < 0:
            raise ValueError("num_motions must be >= 0")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.ground_truth is not None:
            gt = np.asarray(self.ground_truth)
            if gt.shape != (pts.shape[0],) or not np.issubdtype(gt.dtype, np.integer):
                raise ValueError("ground_truth must be K integer labels")
            if gt.size and (gt.min() < 0 or (self.num_motions and gt.max() >= self.num_motions)):
                raise ValueError(f"ground_truth labels must lie in [0, {self.num_motions})")
            gt = gt.astype(int)
            gt.setflags(write=False)
            object.__setattr__(self, "ground_truth", gt)

    @property
    def feature_count(self) -> int:
        return self.points.shape[0]

    @property
    def frame_count(self) -> int:
        return self.points.shape[1]

    def frame(self, l: int) -> np.ndarray:
        """All feature positions at frame ``l`` as a ``(K, 2)`` array."""
        return self.points[:, l, :]

    def __eq__(self, other):
        if not isinstance(other, TrajectorySet):
            return NotImplemented
        same_gt = (self.ground_truth is None and other.ground_truth is None) or (
            self.ground_truth is not None
            and other.ground_truth is not None
            and np.array_equal(self.ground_truth, other.ground_truth)
        )
        return (
            self.num_motions == other.num_motions
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and same_gt
        )


@dataclass(eq=False)
class Labeling:
    """Per-feature motion labels with a confidence and the stage that set them.

    ``labels`` may hold ``UNLABELED`` (-1) for features not yet assigned
    (a partial labeling, as produced by the atom stages).
    """

    labels: np.ndarray
    confidence: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.confidence = np.asarray(self.confidence, dtype=float)
        self.source = np.asarray(self.source, dtype=object)
        k = self.labels.shape[0]
        if self.confidence.shape != (k,) or self.source.shape != (k,):
            raise ValueError("labels, confidence and source must all have length K")
        if not np.all(np.isfinite(self.confidence)):
            raise ValueError("confidence must be finite")

    @classmethod
    def unlabeled(cls, k: int) -> "Labeling":
        return cls(np.full(k, UNLABELED), np.zeros(k), np.full(k, RV, dtype=object))

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def __len__(self):
        return self.labels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return (
            np.array_equal(self.labels, other.labels)
            and np.array_equal(self.confidence, other.confidence)
            and list(self.source) == list(other.source)
        )
