from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import assert_finite, layer_norm
from apps.pavenet.models.backbones.tokenizer import TokenLayout
from apps.pavenet.models.base_module import BaseModule, ModuleList
from apps.pavenet.models.common.deform_attn import MultiScaleDeformableAttention
from apps.pavenet.models.common.transformer import FFN, MLP, MultiHeadSelfAttention
from apps.pavenet.models.config import AttentionConfig
from apps.pavenet.models.decoders.pose_decoder import FrameOffsetHead
from apps.pavenet.models.heads.initial_pose_head import SCALE_FLOOR
from apps.pavenet.models.utils.weights_init import trunc_normal_


class JointDecoderLayer(BaseModule):
    """Joint-to-joint self-attention within a pose, feature-to-joint
    deformable attention around the joint in every frame, FFN, then a joint
    offset.

    Args:
        attn (AttentionConfig): attention widths and counts.
        num_frames (int): frames f in the window.
    """

    def __init__(self, attn: AttentionConfig, num_frames: int, init_cfg=None) -> None:
        super().__init__(init_cfg=init_cfg)

        self.query_pos = MLP(2, attn.embed_dims, attn.embed_dims)
        self.self_attn = MultiHeadSelfAttention(attn.embed_dims, attn.num_heads)
        self.frame_offsets = FrameOffsetHead(attn.embed_dims, num_frames, 1)
        self.cross_attn = MultiScaleDeformableAttention(
            embed_dims=attn.embed_dims,
            num_heads=attn.num_heads,
            num_levels=attn.num_levels,
            num_points=attn.num_points,
            num_frames=num_frames,
            num_refs=1,
        )
        self.norm = nn.LayerNorm(attn.embed_dims)
        self.ffn = FFN(attn.embed_dims, attn.feedforward_channels)
        self.refine = MLP(attn.embed_dims, attn.embed_dims, 2, zero_last=True)

    def forward(
        self, query: Tensor, joints: Tensor, value: Tensor, layout: TokenLayout
    ) -> tuple[Tensor, Tensor]:
        """
        Args:
            query (Tensor): joint queries of shape (B, M, J, D).
            joints (Tensor): current joints of shape (B, M, J, 2).
            value (Tensor): encoded tokens, shape (B, f, N, D).
            layout (TokenLayout): token metadata.

        Returns:
            tuple[Tensor, Tensor]: updated queries and joint offsets (B, M, J, 2).
        """
        batch, num_poses, num_joints, _ = query.shape

        # self-attention stays inside each pose
        query = self.self_attn(
            rearrange(query, "b m j d -> (b m) j d"),
            pos=rearrange(self.query_pos(joints), "b m j d -> (b m) j d"),
        )
        query = rearrange(query, "(b m) j d -> b (m j) d", b=batch)

        # the joint replicated over frames, shifted by per-frame offsets
        sampling = rearrange(joints, "b m j xy -> b (m j) 1 1 xy") + self.frame_offsets(query)
        out = self.cross_attn(query, sampling, value, layout.spatial_shapes)
        query = layer_norm(query + out, self.norm.weight, self.norm.bias, self.norm.eps)
        query = self.ffn(query)

        delta = self.refine(query)

        return (
            rearrange(query, "b (m j) d -> b m j d", m=num_poses),
            rearrange(delta, "b (m j) xy -> b m j xy", m=num_poses),
        )


class SpatiotemporalJointDecoder(BaseModule):
    """Refines the joints of every decoded pose with a shared set of J joint
    queries. Confidences are left to the pose decoder; the decoder only adds
    RLE scales for its refined joints.

    Args:
        attn (AttentionConfig): attention widths and counts.
        num_frames (int): frames f in the window.
        num_joints (int, optional): joints J. Defaults to 15.
        num_layers (int, optional): decoder layers. Defaults to 3.
    """

    def __init__(
        self,
        attn: AttentionConfig,
        num_frames: int,
        num_joints: int = 15,
        num_layers: int = 3,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_joints = num_joints
        self.joint_queries = nn.Parameter(torch.zeros(num_joints, attn.embed_dims))
        self.layers = ModuleList(
            [JointDecoderLayer(attn, num_frames) for _ in range(num_layers)]
        )
        self.scale_head = MLP(attn.embed_dims, attn.embed_dims, 2)

    def _init_weights(self) -> None:
        trunc_normal_(self.joint_queries, std=0.02)

    def forward(
        self, value: Tensor, layout: TokenLayout, poses: Tensor
    ) -> tuple[Tensor, Tensor, list[Tensor]]:
        """
        Args:
            value (Tensor): encoded tokens, shape (B, f, N, D).
            layout (TokenLayout): token metadata.
            poses (Tensor): poses to refine, shape (B, M, J, 2).

        Returns:
            tuple[Tensor, Tensor, list[Tensor]]: refined poses, their RLE
            scales (both (B, M, J, 2)) and the joints after every layer.

        Raises:
            DimensionError: if the poses do not have J joints.
        """
        if poses.dim() != 4 or poses.shape[2] != self.num_joints:
            raise DimensionError(
                f"poses should have {self.num_joints} joints, but got shape {tuple(poses.shape)}"
            )
        batch, num_poses = poses.shape[:2]

        query = self.joint_queries[None, None].expand(batch, num_poses, -1, -1)
        joints = poses
        history = [joints]
        for layer in self.layers:
            query, delta = layer(query, joints, value, layout)
            joints = joints + delta
            history.append(joints)

        assert_finite(joints, "joint decoder output")
        scales = F.softplus(self.scale_head(query)) + SCALE_FLOOR

        return joints, scales, history
