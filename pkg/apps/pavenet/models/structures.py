from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor


@dataclass
class PosePrediction:
    """One supervised stage: poses of shape (B, Q, J, 2) in normalised
    coordinates, score logits of shape (B, Q) and positive RLE scales of
    shape (B, Q, J, 2)."""

    poses: Tensor
    logits: Tensor
    scales: Tensor

    @property
    def scores(self) -> Tensor:
        return self.logits.sigmoid()

    @property
    def num_queries(self) -> int:
        return self.poses.shape[1]

    def gather(self, indices: Tensor) -> PosePrediction:
        """Selects queries ``indices`` of shape (B, K) from every item."""
        joint_index = indices[..., None, None].expand(
            -1, -1, *self.poses.shape[-2:]
        )

        return PosePrediction(
            poses=self.poses.gather(1, joint_index),
            logits=self.logits.gather(1, indices),
            scales=self.scales.gather(1, joint_index),
        )


@dataclass
class PoseTarget:
    """Ground truth of one clip keyframe: joints of shape (G, J, 2) in
    normalised coordinates and visibility of shape (G, J)."""

    joints: Tensor
    visible: Tensor

    @property
    def num_persons(self) -> int:
        return self.joints.shape[0]

    @classmethod
    def empty(cls, num_joints: int = 15) -> PoseTarget:
        return cls(
            joints=torch.zeros(0, num_joints, 2, dtype=torch.float64),
            visible=torch.zeros(0, num_joints, dtype=torch.bool),
        )
