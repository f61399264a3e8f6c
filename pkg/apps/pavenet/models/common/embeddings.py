from __future__ import annotations

import torch
import torch.nn as nn
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.utils.weights_init import trunc_normal_


def add_embeddings(
    tokens: Tensor,
    pos_emb: Tensor,
    scale_emb: Tensor,
    levels: Tensor | None,
) -> Tensor:
    """Adds the positional embedding of every token and the scale embedding of
    its pyramid level.

    Args:
        tokens (Tensor): tokens of shape (..., N, D).
        pos_emb (Tensor): positional embedding of shape (N, D).
        scale_emb (Tensor): per-level embedding of shape (L, D).
        levels (Tensor | None): level index of every token, shape (N,).

    Raises:
        DimensionError: if the level metadata is missing or does not cover
            every token.
    """
    if levels is None:
        raise DimensionError("token level metadata is missing")

    num_tokens = tokens.shape[-2]
    if levels.shape != (num_tokens,) or pos_emb.shape[-2] != num_tokens:
        raise DimensionError(
            f"embeddings should cover {num_tokens} tokens, but got levels {tuple(levels.shape)} and pos_emb {tuple(pos_emb.shape)}"
        )

    return tokens + pos_emb + scale_emb[levels]


class TokenEmbedding(BaseModule):
    """Learnable per-token position embedding plus per-level scale embedding.

    Args:
        num_tokens (int): tokens N per frame.
        num_levels (int): pyramid levels L.
        embed_dims (int, optional): token width D. Defaults to 64.
    """

    def __init__(
        self, num_tokens: int, num_levels: int, embed_dims: int = 64, init_cfg=None
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.pos_embed = nn.Parameter(torch.zeros(num_tokens, embed_dims))
        self.level_embed = nn.Parameter(torch.zeros(num_levels, embed_dims))

    def _init_weights(self) -> None:
        trunc_normal_(self.pos_embed, std=0.02)
        trunc_normal_(self.level_embed, std=0.02)

    def forward(self, tokens: Tensor, levels: Tensor) -> Tensor:
        return add_embeddings(tokens, self.pos_embed, self.level_embed, levels)
