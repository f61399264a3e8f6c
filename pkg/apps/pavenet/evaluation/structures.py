from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from apps.pavenet.data.skeleton import JOINT_NAMES


@dataclass
class PoseSet:
    """Poses of one image in pixels.

    ``poses`` has shape (P, J, 2) and ``visible`` (P, J). ``scores`` are
    confidences of predictions (ones for ground truth); ``heights`` are the
    figure heights used as the correctness scale of ground truth.
    """

    poses: np.ndarray
    visible: np.ndarray
    scores: np.ndarray | None = None
    heights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.poses = np.asarray(self.poses, dtype=np.float64)
        self.visible = np.asarray(self.visible, dtype=bool).reshape(self.poses.shape[:2])
        if self.scores is None:
            self.scores = np.ones(len(self.poses), dtype=np.float64)
        self.scores = np.asarray(self.scores, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.poses)

    @classmethod
    def empty(cls, num_joints: int = len(JOINT_NAMES)) -> PoseSet:
        return cls(
            poses=np.zeros((0, num_joints, 2)),
            visible=np.zeros((0, num_joints), dtype=bool),
        )

    def figure_heights(self) -> np.ndarray:
        """Given heights, or else the vertical extent of the visible joints."""
        if self.heights is not None:
            return np.asarray(self.heights, dtype=np.float64)

        heights = np.zeros(len(self.poses), dtype=np.float64)
        for i, (pose, visible) in enumerate(zip(self.poses, self.visible)):
            if visible.any():
                ys = pose[visible, 1]
                heights[i] = ys.max() - ys.min()

        return heights

    def above(self, threshold: float) -> PoseSet:
        keep = self.scores > threshold
        return PoseSet(
            poses=self.poses[keep],
            visible=self.visible[keep],
            scores=self.scores[keep],
            heights=None if self.heights is None else np.asarray(self.heights)[keep],
        )


@dataclass
class ImageAnnotations:
    image_id: int
    file_name: str
    poses: PoseSet


@dataclass
class AnnotationSet:
    """Per-image poses with a fixed keypoint order shared by every image."""

    images: list[ImageAnnotations] = field(default_factory=list)
    keypoint_names: tuple[str, ...] = JOINT_NAMES

    @property
    def num_joints(self) -> int:
        return len(self.keypoint_names)

    def by_id(self) -> dict[int, ImageAnnotations]:
        return {image.image_id: image for image in self.images}

    def above(self, threshold: float) -> AnnotationSet:
        """Keeps the poses scored strictly above ``threshold``."""
        return AnnotationSet(
            images=[
                ImageAnnotations(image.image_id, image.file_name, image.poses.above(threshold))
                for image in self.images
            ],
            keypoint_names=self.keypoint_names,
        )
