from __future__ import annotations

import math
from dataclasses import dataclass

import torch.nn as nn
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.utils.weights_init import kaiming_init


@dataclass
class FeaturePyramid:
    """Multi-scale feature maps of a batch of frames.

    ``levels[s]`` has shape (B, D, H_s, W_s); resolutions strictly decrease
    with the level index and every level has the same width D.
    """

    levels: list[Tensor]
    strides: tuple[int, ...]

    @property
    def spatial_shapes(self) -> list[tuple[int, int]]:
        return [(level.shape[-2], level.shape[-1]) for level in self.levels]

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def _conv(in_channels: int, out_channels: int, stride: int) -> nn.Conv2d:
    # replicate padding keeps constant inputs constant
    return nn.Conv2d(
        in_channels,
        out_channels,
        kernel_size=3,
        stride=stride,
        padding=1,
        padding_mode="replicate",
    )


class TinyConvBackbone(BaseModule):
    """Small from-scratch convolutional feature extractor.

    | ((B, 3, H, W))--
    |    --[stride-2 stem convs down to strides[0]]--
    |    --[stride-1 refinement conv]-->((B, D, H/s0, W/s0))
    |    --[one stride-2 conv per further level]-->((B, D, H/s1, W/s1)) ...

    With the default strides (4, 8) this is four convolution stages.
    """

    def __init__(
        self,
        in_channels: int = 3,
        embed_dims: int = 64,
        strides: tuple[int, ...] = (4, 8),
        init_cfg=None,
    ) -> None:
        """
        Args:
            in_channels (int, optional): image channels. Defaults to 3.
            embed_dims (int, optional): channel width D of every level.
                Defaults to 64.
            strides (tuple[int, ...], optional): output stride of every level,
                a power of two doubling from level to level. Defaults to (4, 8).
            init_cfg (optional): extra initialisers. Defaults to None.
        """
        super().__init__(init_cfg=init_cfg)

        strides = tuple(strides)
        if not strides or strides[0] < 2 or strides[0] & (strides[0] - 1):
            raise ValueError(
                f"first stride should be a power of two >= 2, but got {strides}"
            )
        if any(b != 2 * a for a, b in zip(strides, strides[1:])):
            raise ValueError(f"strides should double per level, but got {strides}")
        self.strides = strides

        num_stem = int(math.log2(strides[0]))
        widths = [
            max(embed_dims >> (num_stem - 1 - i), 8) for i in range(num_stem)
        ]
        widths[-1] = embed_dims

        stem = []
        for i, width in enumerate(widths):
            stem += [_conv(in_channels if i == 0 else widths[i - 1], width, 2), nn.GELU()]
        stem += [_conv(embed_dims, embed_dims, 1), nn.GELU()]
        self.stem = nn.Sequential(*stem)

        self.downsamples = nn.ModuleList(
            nn.Sequential(_conv(embed_dims, embed_dims, 2), nn.GELU())
            for _ in strides[1:]
        )

    def _init_weights(self) -> None:
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                kaiming_init(m, mode="fan_in", nonlinearity="relu")

    def forward(self, images: Tensor) -> FeaturePyramid:
        """
        Args:
            images (Tensor): frames of shape (B, 3, H, W) with values in [0, 1].

        Returns:
            FeaturePyramid: one map per configured stride.

        Raises:
            DimensionError: if H or W is not divisible by the largest stride.
        """
        height, width = images.shape[-2:]
        required = self.strides[-1]
        if height % required or width % required:
            raise DimensionError(
                f"image size {height}x{width} should be divisible by the largest stride {required}"
            )

        x = self.stem(images)
        levels = [x]
        for downsample in self.downsamples:
            x = downsample(x)
            levels.append(x)

        return FeaturePyramid(levels=levels, strides=self.strides)
