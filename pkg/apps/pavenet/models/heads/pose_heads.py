from __future__ import annotations

import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.common.transformer import MLP
from apps.pavenet.models.heads.initial_pose_head import SCALE_FLOOR
from apps.pavenet.models.structures import PosePrediction
from apps.pavenet.models.utils.weights_init import bias_init_with_prob, constant_init


class PoseHeads(BaseModule):
    """Pose, score and scale heads on decoded pose queries.

    The pose head emits residuals added to the reference pose; with
    ``with_residual=False`` the reference pose is returned as is. Scores are
    logits (``sigmoid`` gives the confidence) and scales go through
    ``softplus``.

    Args:
        embed_dims (int, optional): query width D. Defaults to 64.
        num_joints (int, optional): joints J. Defaults to 15.
        with_residual (bool, optional): predict a pose residual.
            Defaults to True.
        prior_prob (float, optional): initial confidence. Defaults to 0.01.
    """

    def __init__(
        self,
        embed_dims: int = 64,
        num_joints: int = 15,
        with_residual: bool = True,
        prior_prob: float = 0.01,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_joints = num_joints
        self.prior_prob = prior_prob
        self.residual_head = (
            MLP(embed_dims, embed_dims, num_joints * 2, num_layers=3, zero_last=True)
            if with_residual
            else None
        )
        self.score_head = nn.Linear(embed_dims, 1)
        self.scale_head = MLP(embed_dims, embed_dims, num_joints * 2)

    def _init_weights(self) -> None:
        constant_init(
            self.score_head, val=0.0, bias=bias_init_with_prob(self.prior_prob)
        )

    def forward(self, query: Tensor, reference: Tensor) -> PosePrediction:
        """
        Args:
            query (Tensor): decoded queries of shape (B, M, D).
            reference (Tensor): last keyframe reference poses (B, M, J, 2).
        """
        poses = reference
        if self.residual_head is not None:
            poses = reference + self.residual_head(query).view_as(reference)

        return PosePrediction(
            poses=poses,
            logits=self.score_head(query).squeeze(-1),
            scales=F.softplus(self.scale_head(query)).view_as(reference)
            + SCALE_FLOOR,
        )
