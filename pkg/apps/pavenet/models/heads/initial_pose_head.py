from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.common.transformer import MLP
from apps.pavenet.models.structures import PosePrediction
from apps.pavenet.models.utils.weights_init import bias_init_with_prob, constant_init


SCALE_FLOOR = 1e-6


def select_top_m(scores: Tensor, num_queries: int) -> Tensor:
    """Indices of the ``num_queries`` highest scores, best first; equal
    scores keep the lower token index first.

    Args:
        scores (Tensor): confidences or logits of shape (..., N).
        num_queries (int): M.

    Returns:
        Tensor: indices of shape (..., M).

    Raises:
        DimensionError: if N < M.
    """
    if scores.shape[-1] < num_queries:
        raise DimensionError(
            f"top-M selection needs at least {num_queries} tokens, but got {scores.shape[-1]}"
        )
    order = torch.sort(scores, dim=-1, descending=True, stable=True).indices

    return order[..., :num_queries]


class InitialPoseHead(BaseModule):
    """Token-wise pose and confidence regression over all keyframe tokens.

    Every token predicts a full-body pose as offsets from its own normalised
    cell centre, a confidence logit and per-joint RLE scales.

    Args:
        embed_dims (int, optional): token width D. Defaults to 64.
        num_joints (int, optional): joints J. Defaults to 15.
        prior_prob (float, optional): initial confidence. Defaults to 0.01.
    """

    def __init__(
        self,
        embed_dims: int = 64,
        num_joints: int = 15,
        prior_prob: float = 0.01,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_joints = num_joints
        self.prior_prob = prior_prob
        self.pose_head = MLP(
            embed_dims, embed_dims, num_joints * 2, num_layers=3, zero_last=True
        )
        self.score_head = nn.Linear(embed_dims, 1)
        self.scale_head = MLP(embed_dims, embed_dims, num_joints * 2)

    def _init_weights(self) -> None:
        constant_init(
            self.score_head, val=0.0, bias=bias_init_with_prob(self.prior_prob)
        )

    def forward(self, tokens: Tensor, centers: Tensor) -> PosePrediction:
        """
        Args:
            tokens (Tensor): encoded keyframe tokens of shape (B, N, D).
            centers (Tensor): normalised token centres of shape (N, 2).

        Returns:
            PosePrediction: N candidate poses per item.
        """
        batch, num_tokens, _ = tokens.shape
        offsets = self.pose_head(tokens).view(batch, num_tokens, self.num_joints, 2)
        poses = centers.to(tokens.dtype)[None, :, None, :] + offsets

        return PosePrediction(
            poses=poses,
            logits=self.score_head(tokens).squeeze(-1),
            scales=F.softplus(self.scale_head(tokens)).view_as(poses) + SCALE_FLOOR,
        )

    def select(self, candidates: PosePrediction, num_queries: int) -> PosePrediction:
        """Top-M candidates by confidence (ties: lower token index)."""
        return candidates.gather(select_top_m(candidates.logits, num_queries))
