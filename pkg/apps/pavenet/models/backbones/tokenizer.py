from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import torch
import torch.nn as nn
from einops import rearrange
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.backbones.tiny_convnet import FeaturePyramid
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.utils.weights_init import xavier_init


@dataclass(frozen=True, eq=False)
class TokenLayout:
    """Metadata of the N tokens of one frame, in level-major, row-major order.

    ``centers`` holds normalised (x, y) cell centres: ``c / (W_l - 1)``,
    ``r / (H_l - 1)``.
    """

    spatial_shapes: tuple[tuple[int, int], ...]
    level_start_index: tuple[int, ...]
    levels: Tensor
    rows: Tensor
    cols: Tensor
    centers: Tensor

    @property
    def num_tokens(self) -> int:
        return int(self.levels.numel())

    @property
    def num_levels(self) -> int:
        return len(self.spatial_shapes)

    def index_of(self, level: int, row: int, col: int) -> int:
        height, width = self.spatial_shapes[level]
        if not (0 <= row < height and 0 <= col < width):
            raise DimensionError(
                f"cell ({row}, {col}) is outside level {level} of shape {height}x{width}"
            )

        return self.level_start_index[level] + row * width + col

    def position_of(self, index: int) -> tuple[int, int, int]:
        return (
            int(self.levels[index]),
            int(self.rows[index]),
            int(self.cols[index]),
        )

    @classmethod
    def from_shapes(cls, spatial_shapes: tuple[tuple[int, int], ...]) -> TokenLayout:
        return _layout(tuple(tuple(s) for s in spatial_shapes))


@lru_cache(maxsize=16)
def _layout(spatial_shapes: tuple[tuple[int, int], ...]) -> TokenLayout:
    levels, rows, cols, centers, starts = [], [], [], [], []
    start = 0
    for level, (height, width) in enumerate(spatial_shapes):
        r, c = torch.meshgrid(
            torch.arange(height), torch.arange(width), indexing="ij"
        )
        r, c = r.reshape(-1), c.reshape(-1)
        starts.append(start)
        start += height * width

        levels.append(torch.full_like(r, level))
        rows.append(r)
        cols.append(c)
        centers.append(
            torch.stack(
                [
                    c.to(torch.float64) / max(width - 1, 1),
                    r.to(torch.float64) / max(height - 1, 1),
                ],
                dim=-1,
            )
        )

    return TokenLayout(
        spatial_shapes=spatial_shapes,
        level_start_index=tuple(starts),
        levels=torch.cat(levels),
        rows=torch.cat(rows),
        cols=torch.cat(cols),
        centers=torch.cat(centers),
    )


@dataclass
class TokenSet:
    """Tokens of shape (B, N, D) or (B, F, N, D) with their layout."""

    tokens: Tensor
    layout: TokenLayout


class PatchEmbed(BaseModule):
    """1x1 patch embedding of every pyramid level.

    | ((B, C, H_s, W_s)) per level--
    |    --[1x1 projection, one per level]--
    |    --[Flatten + concat over levels]--
    | -->((B, N, D))
    """

    def __init__(
        self,
        in_channels: int = 64,
        embed_dims: int = 64,
        num_levels: int = 2,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.in_channels = in_channels
        self.projections = nn.ModuleList(
            nn.Conv2d(in_channels, embed_dims, kernel_size=1)
            for _ in range(num_levels)
        )

    def _init_weights(self) -> None:
        for projection in self.projections:
            xavier_init(projection)

    def forward(self, pyramid: FeaturePyramid) -> TokenSet:
        if pyramid.num_levels != len(self.projections):
            raise DimensionError(
                f"expected {len(self.projections)} pyramid levels, but got {pyramid.num_levels}"
            )

        tokens = []
        for level, projection in zip(pyramid.levels, self.projections):
            if level.shape[1] != self.in_channels:
                raise DimensionError(
                    f"pyramid width should be {self.in_channels}, but got {level.shape[1]}"
                )
            tokens.append(rearrange(projection(level), "b d h w -> b (h w) d"))

        layout = TokenLayout.from_shapes(tuple(pyramid.spatial_shapes))

        return TokenSet(tokens=torch.cat(tokens, dim=1), layout=layout)
