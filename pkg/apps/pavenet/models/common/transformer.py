from __future__ import annotations

import math

import torch.nn as nn
from einops import rearrange
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import layer_norm, matmul, softmax
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.utils.weights_init import constant_init, xavier_init


class MultiHeadSelfAttention(BaseModule):
    """Scaled dot-product multi-head self-attention with post-norm residual.

    Args:
        embed_dims (int, optional): token width D. Defaults to 64.
        num_heads (int, optional): number of heads, must divide D. Defaults to 4.
        init_cfg (optional): extra initialisers. Defaults to None.
    """

    def __init__(
        self,
        embed_dims: int = 64,
        num_heads: int = 4,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        if embed_dims % num_heads != 0:
            raise DimensionError(
                f"embed_dims should be divisible by num_heads, but got {embed_dims} and {num_heads}"
            )

        self.embed_dims = embed_dims
        self.num_heads = num_heads
        self.head_dims = embed_dims // num_heads

        self.q_proj = nn.Linear(embed_dims, embed_dims)
        self.k_proj = nn.Linear(embed_dims, embed_dims)
        self.v_proj = nn.Linear(embed_dims, embed_dims)
        self.out_proj = nn.Linear(embed_dims, embed_dims)
        self.norm = nn.LayerNorm(embed_dims)

    def _init_weights(self) -> None:
        for proj in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            xavier_init(proj)

    def forward(self, x: Tensor, pos: Tensor | None = None) -> Tensor:
        """Forward pass.

        Positional embeddings are added to queries and keys only::

            x ──(+pos)──► q, k
            x ──────────► v
            softmax(q kᵀ / √d) v ──► out_proj ──► (+x) ──► norm

        Args:
            x (Tensor): tokens of shape (M, D) or (B, M, D).
            pos (Tensor | None, optional): positional embedding broadcastable
                to ``x``. Defaults to None.

        Returns:
            Tensor: tokens of the same shape as ``x``.
        """
        unbatched = x.dim() == 2
        if unbatched:
            x = x.unsqueeze(0)
            pos = pos.unsqueeze(0) if pos is not None else None
        if x.shape[1] < 1:
            raise DimensionError("self-attention needs at least one token")

        qk = x if pos is None else x + pos
        q = rearrange(self.q_proj(qk), "b m (h d) -> b h m d", h=self.num_heads)
        k = rearrange(self.k_proj(qk), "b m (h d) -> b h m d", h=self.num_heads)
        v = rearrange(self.v_proj(x), "b m (h d) -> b h m d", h=self.num_heads)

        scores = matmul(q, k.transpose(-2, -1)) / math.sqrt(self.head_dims)
        attn = softmax(scores, axis=-1)
        out = rearrange(matmul(attn, v), "b h m d -> b m (h d)")

        out = layer_norm(
            x + self.out_proj(out), self.norm.weight, self.norm.bias, self.norm.eps
        )

        return out.squeeze(0) if unbatched else out


class FFN(BaseModule):
    """Token-wise two-layer MLP with post-norm residual:
    ``norm(x + fc2(gelu(fc1(x))))``.

    With ``fc2`` zeroed the block reduces to ``norm(x)``.

    Args:
        embed_dims (int, optional): token width D. Defaults to 64.
        feedforward_channels (int, optional): hidden width. Defaults to 256.
        init_cfg (optional): extra initialisers. Defaults to None.
    """

    def __init__(
        self,
        embed_dims: int = 64,
        feedforward_channels: int = 256,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        self.fc1 = nn.Linear(embed_dims, feedforward_channels)
        self.activate = nn.GELU()
        self.fc2 = nn.Linear(feedforward_channels, embed_dims)
        self.norm = nn.LayerNorm(embed_dims)

    def _init_weights(self) -> None:
        xavier_init(self.fc1)
        xavier_init(self.fc2)

    def forward(self, x: Tensor) -> Tensor:
        out = self.fc2(self.activate(self.fc1(x)))

        return layer_norm(x + out, self.norm.weight, self.norm.bias, self.norm.eps)


class MLP(BaseModule):
    """Plain token-wise MLP used by the prediction heads.

    Args:
        in_channels (int): input width.
        hidden_channels (int): hidden width.
        out_channels (int): output width.
        num_layers (int, optional): number of linear layers. Defaults to 2.
        zero_last (bool, optional): zero the last layer so the head starts
            at a zero output. Defaults to False.
    """

    def __init__(
        self,
        in_channels: int,
        hidden_channels: int,
        out_channels: int,
        num_layers: int = 2,
        zero_last: bool = False,
        init_cfg=None,
    ) -> None:
        super().__init__(init_cfg=init_cfg)

        widths = [in_channels] + [hidden_channels] * (num_layers - 1)
        self.layers = nn.ModuleList(
            nn.Linear(n, k) for n, k in zip(widths, widths[1:] + [out_channels])
        )
        self.activate = nn.GELU()
        self.zero_last = zero_last

    def _init_weights(self) -> None:
        for layer in self.layers:
            xavier_init(layer)
        if self.zero_last:
            constant_init(self.layers[-1], val=0.0, bias=0.0)

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activate(x)

        return x
