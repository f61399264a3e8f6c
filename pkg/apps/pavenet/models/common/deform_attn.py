"""Multi-scale deformable attention with frame-indexed sampling slots.

Every head of every query owns a grid of sampling slots indexed by
(frame, level, reference point, K). Each slot samples the value map of its
frame and level bilinearly at ``reference + offset``; the per-head weights are
normalised over all slots of that head.

Normalised coordinates map to level pixels as ``x_px = x * (W_l - 1)`` and
``y_px = y * (H_l - 1)``, which is ``grid_sample`` with ``align_corners=True``.
"""
from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import softmax
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.utils.weights_init import (
    constant_init,
    ring_offsets,
    xavier_init,
)


def _pixel_to_grid(coord: Tensor, size: int) -> Tensor:
    if size == 1:
        return torch.zeros_like(coord)

    return coord * (2.0 / (size - 1)) - 1.0


def bilinear_sample(feature_map: Tensor, point: Tensor) -> Tensor:
    """Bilinear interpolation of a channel-last map at pixel coordinates.

    Samples outside ``[0, W-1] x [0, H-1]`` read zeros from the padding.

    Args:
        feature_map (Tensor): map of shape (H, W, D).
        point (Tensor): (x, y) pixel coordinates of shape (..., 2).

    Returns:
        Tensor: sampled vectors of shape (..., D).

    Example:
        >>> feature_map = torch.tensor([[[0.0], [2.0]]])
        >>> bilinear_sample(feature_map, torch.tensor([0.5, 0.0]))
        tensor([1.])
    """
    height, width, channels = feature_map.shape
    if height * width == 0:
        raise DimensionError("bilinear_sample needs a non-empty map")

    batch_shape = point.shape[:-1]
    flat = point.reshape(-1, 2)
    grid = torch.stack(
        [_pixel_to_grid(flat[:, 0], width), _pixel_to_grid(flat[:, 1], height)],
        dim=-1,
    )
    value = rearrange(feature_map, "h w d -> 1 d h w")
    out = F.grid_sample(
        value,
        grid.reshape(1, 1, -1, 2),
        mode="bilinear",
        padding_mode="zeros",
        align_corners=True,
    )
    out = rearrange(out, "1 d 1 p -> p d")

    # a single cell along an axis: weight falls off linearly with distance
    if width == 1:
        out = out * (1.0 - flat[:, :1].abs()).clamp(min=0.0)
    if height == 1:
        out = out * (1.0 - flat[:, 1:].abs()).clamp(min=0.0)

    return out.reshape(*batch_shape, channels)


def multi_scale_deformable_attn(
    value: Tensor,
    spatial_shapes: Sequence[tuple[int, int]],
    sampling_locations: Tensor,
    attention_weights: Tensor,
) -> Tensor:
    """Weighted sum of bilinear samples over all slots of every head.

    Args:
        value (Tensor): projected values of shape (B, F, N, h, d) where N is
            the flattened pyramid of every frame.
        spatial_shapes (Sequence[tuple[int, int]]): (H_l, W_l) per level.
        sampling_locations (Tensor): normalised locations of shape
            (B, Q, h, F, L, P, 2); pixel coordinates are the locations times
            ``max(W_l - 1, 1)`` and ``max(H_l - 1, 1)``.
        attention_weights (Tensor): weights of shape (B, Q, h, F, L, P),
            normalised over (F, L, P) per head.

    Returns:
        Tensor: output of shape (B, Q, h * d).
    """
    batch, _, num_heads, num_frames, num_levels, _, _ = sampling_locations.shape
    value_list = value.split([h * w for h, w in spatial_shapes], dim=2)
    grids = 2.0 * sampling_locations - 1.0

    sampled = []
    for f in range(num_frames):
        for level, (height, width) in enumerate(spatial_shapes):
            value_l = rearrange(
                value_list[level][:, f],
                "b (hh ww) h d -> (b h) d hh ww",
                hh=height,
                ww=width,
            )
            grid_l = rearrange(grids[:, :, :, f, level], "b q h p xy -> (b h) q p xy")
            out_l = F.grid_sample(
                value_l,
                grid_l,
                mode="bilinear",
                padding_mode="zeros",
                align_corners=True,
            )
            # a single cell along an axis: same fall-off as bilinear_sample
            for axis, size in enumerate((width, height)):
                if size == 1:
                    pixel = sampling_locations[:, :, :, f, level, :, axis]
                    falloff = (1.0 - pixel.abs()).clamp(min=0.0)
                    out_l = out_l * rearrange(falloff, "b q h p -> (b h) 1 q p")
            sampled.append(out_l)

    # (b h, d, q, f * l, p) -> (b h, d, q, f * l * p)
    stacked = torch.stack(sampled, dim=-2).flatten(-2)
    weights = rearrange(attention_weights, "b q h f l p -> (b h) 1 q (f l p)")
    out = (stacked * weights).sum(dim=-1)

    return rearrange(out, "(b h) d q -> b q (h d)", b=batch, h=num_heads)


class MultiScaleDeformableAttention(BaseModule):
    """Deformable cross-attention over the feature pyramids of one or more
    frames.

    Args:
        embed_dims (int, optional): token width D. Defaults to 64.
        num_heads (int, optional): heads h; must divide D. Defaults to 4.
        num_levels (int, optional): pyramid levels L. Defaults to 2.
        num_points (int, optional): learned offsets K per slot. Defaults to 4.
        num_frames (int, optional): frames F the query samples from.
            Defaults to 1.
        num_refs (int, optional): reference points R per frame (J for a pose
            query, 1 otherwise). Defaults to 1.
        init_cfg (optional): extra initialisers. Defaults to None.

    Example:
        >>> attn = MultiScaleDeformableAttention(embed_dims=8, num_heads=2)
        >>> attn.init_weights()
        >>> out = attn(query, reference_points, value, [(16, 24), (8, 12)])
    """

    def __init__(
        self,
        embed_dims: int = 64,
        num_heads: int = 4,
        num_levels: int = 2,
        num_points: int = 4,
        num_frames: int = 1,
        num_refs: int = 1,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        if embed_dims % num_heads != 0:
            raise DimensionError(
                f"embed_dims should be divisible by num_heads, but got {embed_dims} and {num_heads}"
            )
        if num_points < 1:
            raise DimensionError(f"num_points should be >= 1, but got {num_points}")

        self.embed_dims = embed_dims
        self.num_heads = num_heads
        self.num_levels = num_levels
        self.num_points = num_points
        self.num_frames = num_frames
        self.num_refs = num_refs

        num_slots = num_frames * num_levels * num_refs * num_points
        self.sampling_offsets = nn.Linear(embed_dims, num_heads * num_slots * 2)
        self.attention_weights = nn.Linear(embed_dims, num_heads * num_slots)
        self.value_proj = nn.Linear(embed_dims, embed_dims)
        self.output_proj = nn.Linear(embed_dims, embed_dims)

    @property
    def num_slots(self) -> int:
        return self.num_frames * self.num_levels * self.num_refs * self.num_points

    def _init_weights(self) -> None:
        constant_init(self.sampling_offsets, val=0.0)
        bias = ring_offsets(self.num_heads, self.num_points)[:, None, None, None]
        bias = bias.expand(
            self.num_heads,
            self.num_frames,
            self.num_levels,
            self.num_refs,
            self.num_points,
            2,
        )
        with torch.no_grad():
            self.sampling_offsets.bias.copy_(bias.reshape(-1))

        constant_init(self.attention_weights, val=0.0, bias=0.0)
        xavier_init(self.value_proj)
        xavier_init(self.output_proj)

    def _check_inputs(
        self,
        query: Tensor,
        reference_points: Tensor,
        value: Tensor,
        spatial_shapes: Sequence[tuple[int, int]],
    ) -> Tensor:
        batch, num_queries, _ = query.shape
        if len(spatial_shapes) != self.num_levels:
            raise DimensionError(
                f"expected {self.num_levels} pyramid levels, but got {len(spatial_shapes)}"
            )
        if value.dim() != 4 or value.shape[1] != self.num_frames:
            raise DimensionError(
                f"value should have shape (B, {self.num_frames}, N, D), but got {tuple(value.shape)}"
            )
        num_tokens = sum(h * w for h, w in spatial_shapes)
        if value.shape[2] != num_tokens or value.shape[3] != self.embed_dims:
            raise DimensionError(
                f"value should hold {num_tokens} tokens of width {self.embed_dims}, but got {tuple(value.shape)}"
            )

        if reference_points.dim() == 5:
            reference_points = reference_points[:, :, :, None].expand(
                -1, -1, -1, self.num_levels, -1, -1
            )
        expected = (
            batch,
            num_queries,
            self.num_frames,
            self.num_levels,
            self.num_refs,
            2,
        )
        if tuple(reference_points.shape) != expected:
            raise DimensionError(
                f"reference_points should have shape {expected}, but got {tuple(reference_points.shape)}"
            )

        return reference_points

    def forward(
        self,
        query: Tensor,
        reference_points: Tensor,
        value: Tensor,
        spatial_shapes: Sequence[tuple[int, int]],
        return_weights: bool = False,
    ) -> Tensor | tuple[Tensor, Tensor]:
        """Forward pass.

        Args:
            query (Tensor): queries of shape (B, Q, D).
            reference_points (Tensor): normalised (x, y) references of shape
                (B, Q, F, R, 2), shared by all levels, or (B, Q, F, L, R, 2).
            value (Tensor): flattened pyramids of shape (B, F, N, D).
            spatial_shapes (Sequence[tuple[int, int]]): (H_l, W_l) per level.
            return_weights (bool, optional): also return the normalised
                weights of shape (B, Q, h, slots). Defaults to False.

        Returns:
            Tensor | tuple[Tensor, Tensor]: output of shape (B, Q, D) and,
            optionally, the attention weights.
        """
        reference_points = self._check_inputs(
            query, reference_points, value, spatial_shapes
        )
        batch, num_queries, _ = query.shape

        value = rearrange(
            self.value_proj(value), "b f n (h d) -> b f n h d", h=self.num_heads
        )

        offsets = rearrange(
            self.sampling_offsets(query),
            "b q (h f l r k xy) -> b q h f l r k xy",
            h=self.num_heads,
            f=self.num_frames,
            l=self.num_levels,
            r=self.num_refs,
            k=self.num_points,
        )
        normalizer = torch.tensor(
            [[w - 1, h - 1] for h, w in spatial_shapes],
            dtype=query.dtype,
            device=query.device,
        ).clamp(min=1)
        locations = (
            reference_points[:, :, None, :, :, :, None, :]
            + offsets / normalizer[None, None, None, None, :, None, None, :]
        )
        locations = rearrange(locations, "b q h f l r k xy -> b q h f l (r k) xy")

        logits = rearrange(
            self.attention_weights(query), "b q (h s) -> b q h s", h=self.num_heads
        )
        weights = softmax(logits, axis=-1)

        out = multi_scale_deformable_attn(
            value,
            spatial_shapes,
            locations,
            rearrange(
                weights,
                "b q h (f l p) -> b q h f l p",
                f=self.num_frames,
                l=self.num_levels,
            ),
        )
        out = self.output_proj(out)

        if return_weights:
            return out, weights

        return out
