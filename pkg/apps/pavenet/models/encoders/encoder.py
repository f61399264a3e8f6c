from __future__ import annotations

import torch
import torch.nn as nn
from einops import rearrange
from torch import Tensor

from apps.pavenet.core.tensor import assert_finite, layer_norm
from apps.pavenet.models.backbones.tokenizer import TokenLayout
from apps.pavenet.models.base_module import BaseModule, ModuleList
from apps.pavenet.models.common.deform_attn import MultiScaleDeformableAttention
from apps.pavenet.models.common.transformer import FFN, MultiHeadSelfAttention
from apps.pavenet.models.config import AttentionConfig, EncoderConfig


class EncoderLayer(BaseModule):
    """Self-attention over the tokens of ``num_frames`` frames followed by an
    FFN, both post-norm.

    In deformable mode every token samples every frame around its own cell
    centre, so each sampling slot carries a frame index. In dense mode the
    tokens of all frames attend to each other directly.

    Args:
        attn (AttentionConfig): attention widths and counts.
        num_frames (int, optional): frames in the window. Defaults to 1.
        attention (str, optional): ``"deformable"`` or ``"dense"``.
            Defaults to "deformable".
    """

    def __init__(
        self,
        attn: AttentionConfig,
        num_frames: int = 1,
        attention: str = "deformable",
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.num_frames = num_frames
        self.attention = attention
        if attention == "deformable":
            self.self_attn = MultiScaleDeformableAttention(
                embed_dims=attn.embed_dims,
                num_heads=attn.num_heads,
                num_levels=attn.num_levels,
                num_points=attn.num_points,
                num_frames=num_frames,
                num_refs=1,
            )
            self.norm = nn.LayerNorm(attn.embed_dims)
        elif attention == "dense":
            self.self_attn = MultiHeadSelfAttention(
                embed_dims=attn.embed_dims, num_heads=attn.num_heads
            )
        else:
            raise ValueError(
                f"attention should be 'deformable' or 'dense', but got {attention!r}"
            )
        self.ffn = FFN(
            embed_dims=attn.embed_dims,
            feedforward_channels=attn.feedforward_channels,
        )

    def forward(self, x: Tensor, layout: TokenLayout) -> Tensor:
        """
        Args:
            x (Tensor): tokens of shape (B, F, N, D).
            layout (TokenLayout): metadata of the N tokens of a frame.

        Returns:
            Tensor: updated tokens of shape (B, F, N, D).
        """
        batch, num_frames, num_tokens, _ = x.shape
        query = rearrange(x, "b f n d -> b (f n) d")

        if self.attention == "deformable":
            centers = layout.centers.to(dtype=x.dtype, device=x.device)
            reference_points = centers[None, None, :, None, None, :].expand(
                batch, num_frames, num_tokens, num_frames, 1, 2
            )
            reference_points = rearrange(
                reference_points, "b fq n f r xy -> b (fq n) f r xy"
            )
            out = self.self_attn(query, reference_points, x, layout.spatial_shapes)
            query = layer_norm(
                query + out, self.norm.weight, self.norm.bias, self.norm.eps
            )
        else:
            query = self.self_attn(query)

        query = self.ffn(query)

        return rearrange(query, "b (f n) d -> b f n d", f=num_frames)


class SpatialEncoder(BaseModule):
    """Per-frame encoder: every frame is encoded on its own, so its output can
    be cached and reused by every window that contains the frame.

    Args:
        cfg (EncoderConfig): encoder configuration, ``mode`` must be
            ``"spatial"``.
    """

    def __init__(self, cfg: EncoderConfig, init_cfg=None) -> None:
        super().__init__(init_cfg=init_cfg)

        self.cfg = cfg
        self.layers = ModuleList(
            [
                EncoderLayer(cfg.attn, num_frames=1, attention=cfg.attention)
                for _ in range(cfg.layers)
            ]
        )

    def forward(self, tokens: Tensor, layout: TokenLayout) -> Tensor:
        """Encodes the tokens of one frame.

        Args:
            tokens (Tensor): embedded tokens of shape (B, N, D).
            layout (TokenLayout): token metadata.

        Returns:
            Tensor: encoded tokens of shape (B, N, D).
        """
        x = tokens[:, None]
        for layer in self.layers:
            x = layer(x, layout)

        return assert_finite(x[:, 0], "spatial encoder output")

    def encode_frames(self, tokens: Tensor, layout: TokenLayout) -> Tensor:
        """Encodes every frame of (B, F, N, D) tokens independently."""
        return torch.stack(
            [self(tokens[:, f], layout) for f in range(tokens.shape[1])], dim=1
        )


class SpatiotemporalEncoder(BaseModule):
    """Window encoder whose attention spans the tokens of all frames.

    A per-frame-offset embedding (zero at initialisation) is added to the
    tokens of every frame before the first layer.

    Args:
        cfg (EncoderConfig): encoder configuration.
        num_frames (int): frames f in the window.
    """

    def __init__(self, cfg: EncoderConfig, num_frames: int, init_cfg=None) -> None:
        super().__init__(init_cfg=init_cfg)

        self.cfg = cfg
        self.num_frames = num_frames
        self.frame_embed = nn.Parameter(torch.zeros(num_frames, cfg.attn.embed_dims))
        self.layers = ModuleList(
            [
                EncoderLayer(cfg.attn, num_frames=num_frames, attention=cfg.attention)
                for _ in range(cfg.layers)
            ]
        )

    def _init_weights(self) -> None:
        nn.init.zeros_(self.frame_embed)

    def forward(self, tokens: Tensor, layout: TokenLayout) -> Tensor:
        """
        Args:
            tokens (Tensor): embedded tokens of shape (B, F, N, D).
            layout (TokenLayout): token metadata.

        Returns:
            Tensor: updated tokens of every frame, shape (B, F, N, D).
        """
        if not self.cfg.layers:
            return tokens

        x = tokens + self.frame_embed[None, :, None, :]
        for layer in self.layers:
            x = layer(x, layout)

        return assert_finite(x, "spatiotemporal encoder output")

    def keyframe(self, tokens: Tensor, layout: TokenLayout) -> Tensor:
        """Updated tokens of the centre frame, shape (B, N, D)."""
        return self(tokens, layout)[:, self.num_frames // 2]
