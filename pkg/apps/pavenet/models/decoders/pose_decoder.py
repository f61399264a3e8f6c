"""Spatiotemporal pose decoder.

Each of the M pose queries is tied to one reference pose. In every layer the
query samples the feature tokens of every frame around that frame's current
reference joints (pose-aware attention), so across the window it keeps reading
the same person. References are refined layer by layer::

    P^l(t') = P^(l-1)(t') + dP^l(t')

With one frame and learnable references the same stack is the image-style
pose decoder of the video baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import assert_finite, layer_norm
from apps.pavenet.models.backbones.tokenizer import TokenLayout
from apps.pavenet.models.base_module import BaseModule, ModuleList
from apps.pavenet.models.common.deform_attn import MultiScaleDeformableAttention
from apps.pavenet.models.common.transformer import FFN, MLP, MultiHeadSelfAttention
from apps.pavenet.models.config import AttentionConfig
from apps.pavenet.models.heads.pose_heads import PoseHeads
from apps.pavenet.models.structures import PosePrediction
from apps.pavenet.models.utils.weights_init import trunc_normal_


@dataclass
class ReferencePoseSet:
    """Reference poses of every layer.

    ``layers[l]`` has shape (B, M, F, J, 2) and holds ``P^l(t')`` for every
    frame; ``layers[0]`` is ``initial`` replicated over frames.
    """

    initial: Tensor
    layers: list[Tensor] = field(default_factory=list)

    @property
    def num_layers(self) -> int:
        return len(self.layers) - 1

    def keyframe(self, layer: int) -> Tensor:
        poses = self.layers[layer]
        return poses[:, :, poses.shape[2] // 2]


class FrameOffsetHead(BaseModule):
    """Regresses per-frame joint offsets ``dP(t')`` from a query.

    Starts at zero, so sampling initially happens at the shared reference.

    Args:
        embed_dims (int): query width D.
        num_frames (int): frames f.
        num_joints (int): joints per reference (J, or 1 for a joint query).
    """

    def __init__(
        self, embed_dims: int, num_frames: int, num_joints: int, init_cfg=None
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_frames = num_frames
        self.num_joints = num_joints
        self.mlp = MLP(
            embed_dims, embed_dims, num_frames * num_joints * 2, zero_last=True
        )

    def forward(self, query: Tensor) -> Tensor:
        """Offsets of shape (..., f, J, 2) for queries of shape (..., D)."""
        return self.mlp(query).view(
            *query.shape[:-1], self.num_frames, self.num_joints, 2
        )


class PoseDecoderLayer(BaseModule):
    """Pose-to-pose self-attention, pose-aware deformable cross-attention over
    all frames, FFN, then a per-frame reference refinement.

    Args:
        attn (AttentionConfig): attention widths and counts.
        num_frames (int): frames f in the window.
        num_joints (int): joints J.
    """

    def __init__(
        self, attn: AttentionConfig, num_frames: int, num_joints: int, init_cfg=None
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_frames = num_frames
        self.num_joints = num_joints

        self.query_pos = MLP(num_joints * 2, attn.embed_dims, attn.embed_dims)
        self.self_attn = MultiHeadSelfAttention(attn.embed_dims, attn.num_heads)
        self.frame_offsets = FrameOffsetHead(attn.embed_dims, num_frames, num_joints)
        self.cross_attn = MultiScaleDeformableAttention(
            embed_dims=attn.embed_dims,
            num_heads=attn.num_heads,
            num_levels=attn.num_levels,
            num_points=attn.num_points,
            num_frames=num_frames,
            num_refs=num_joints,
        )
        self.norm = nn.LayerNorm(attn.embed_dims)
        self.ffn = FFN(attn.embed_dims, attn.feedforward_channels)
        self.refine = FrameOffsetHead(attn.embed_dims, num_frames, num_joints)

    def forward(
        self,
        query: Tensor,
        reference: Tensor,
        value: Tensor,
        layout: TokenLayout,
    ) -> tuple[Tensor, Tensor]:
        """
        Args:
            query (Tensor): pose queries of shape (B, M, D).
            reference (Tensor): per-frame references ``P^(l-1)`` of shape
                (B, M, f, J, 2).
            value (Tensor): encoded tokens of every frame, shape (B, f, N, D).
            layout (TokenLayout): token metadata.

        Returns:
            tuple[Tensor, Tensor]: updated queries (B, M, D) and the refinement
            ``dP^l`` of shape (B, M, f, J, 2).
        """
        keyframe = reference[:, :, self.num_frames // 2]
        query = self.self_attn(query, pos=self.query_pos(keyframe.flatten(-2)))

        sampling = reference + self.frame_offsets(query)
        out = self.cross_attn(query, sampling, value, layout.spatial_shapes)
        query = layer_norm(query + out, self.norm.weight, self.norm.bias, self.norm.eps)
        query = self.ffn(query)

        return query, self.refine(query)


class SpatiotemporalPoseDecoder(BaseModule):
    """Stack of :class:`PoseDecoderLayer` with deep-supervision heads.

    Args:
        attn (AttentionConfig): attention widths and counts.
        num_frames (int): frames f the queries sample from.
        num_queries (int, optional): pose queries M. Defaults to 20.
        num_joints (int, optional): joints J. Defaults to 15.
        num_layers (int, optional): decoder layers. Defaults to 3.
        reference (str, optional): ``"top-m"`` (references given to
            :meth:`forward`) or ``"learned"`` (a learnable M x J x 2
            parameter). Defaults to "top-m".
    """

    def __init__(
        self,
        attn: AttentionConfig,
        num_frames: int,
        num_queries: int = 20,
        num_joints: int = 15,
        num_layers: int = 3,
        reference: str = "top-m",
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        if reference not in ("top-m", "learned"):
            raise ValueError(
                f"reference should be 'top-m' or 'learned', but got {reference!r}"
            )

        self.num_frames = num_frames
        self.num_queries = num_queries
        self.num_joints = num_joints
        self.reference = reference

        self.query_embed = nn.Parameter(torch.zeros(num_queries, attn.embed_dims))
        self.reference_embed = (
            nn.Parameter(torch.zeros(num_queries, num_joints, 2))
            if reference == "learned"
            else None
        )
        self.layers = ModuleList(
            [
                PoseDecoderLayer(attn, num_frames, num_joints)
                for _ in range(num_layers)
            ]
        )
        self.heads = ModuleList(
            [
                PoseHeads(attn.embed_dims, num_joints, with_residual=i == num_layers - 1)
                for i in range(num_layers)
            ]
        )

    def _init_weights(self) -> None:
        trunc_normal_(self.query_embed, std=0.02)
        if self.reference_embed is not None:
            nn.init.uniform_(self.reference_embed, -1.5, 1.5)

    def learned_reference(self, batch: int) -> Tensor:
        return self.reference_embed.sigmoid()[None].expand(batch, -1, -1, -1)

    def forward(
        self,
        value: Tensor,
        layout: TokenLayout,
        reference: Tensor | None = None,
    ) -> tuple[Tensor, ReferencePoseSet, list[PosePrediction]]:
        """Decodes M poses of the keyframe.

        Args:
            value (Tensor): encoded tokens of every frame, shape (B, f, N, D).
            layout (TokenLayout): token metadata.
            reference (Tensor | None, optional): keyframe reference poses
                ``P^0`` of shape (B, M, J, 2). Required with top-M references,
                ignored with learned ones. Defaults to None.

        Returns:
            tuple[Tensor, ReferencePoseSet, list[PosePrediction]]: decoded
            queries (B, M, D), the references of every layer and one
            prediction per layer (the last one is the decoder output).

        Raises:
            DimensionError: if the frame count of ``value`` differs from the
                decoder's, or ``reference`` has the wrong shape.
        """
        batch, num_frames = value.shape[:2]
        if num_frames != self.num_frames:
            raise DimensionError(
                f"decoder references span {self.num_frames} frames, but got tokens of {num_frames}"
            )

        if self.reference == "learned":
            reference = self.learned_reference(batch).to(value.dtype)
        expected = (batch, self.num_queries, self.num_joints, 2)
        if reference is None or tuple(reference.shape) != expected:
            raise DimensionError(
                f"reference poses should have shape {expected}, but got {None if reference is None else tuple(reference.shape)}"
            )

        # identical reference in every frame at layer 0
        current = reference[:, :, None].expand(-1, -1, num_frames, -1, -1)
        references = ReferencePoseSet(initial=reference, layers=[current])

        query = self.query_embed[None].expand(batch, -1, -1)
        stages = []
        for layer, heads in zip(self.layers, self.heads):
            query, delta = layer(query, current, value, layout)
            current = current + delta
            references.layers.append(current)
            stages.append(heads(query, current[:, :, num_frames // 2]))

        assert_finite(query, "pose decoder output")

        return query, references, stages
