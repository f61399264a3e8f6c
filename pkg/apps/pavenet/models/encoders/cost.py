from __future__ import annotations

from apps.pavenet.models.config import EncoderConfig


def count_attention_cost(cfg: EncoderConfig, f: int, N: int) -> int:
    """Multiply-adds of the attention core of an encoder over a window.

    With ``D`` the width, ``h`` heads of width ``d = D / h``, ``L`` levels and
    ``K`` points, per layer:

    * dense, spatial: ``f * 2 * N**2 * D`` (f separate frames, scores + mixing)
    * dense, spatiotemporal: ``2 * (f * N)**2 * D``
    * deformable, spatial: ``f * N * h * (L * K) * d``
    * deformable, spatiotemporal: ``f * N * h * (f * L * K) * d``

    Args:
        cfg (EncoderConfig): encoder configuration.
        f (int): frames in the window.
        N (int): tokens per frame.

    Returns:
        int: ``cfg.layers`` times the per-layer cost.

    Example:
        >>> dense = EncoderConfig(mode="spatiotemporal", attention="dense")
        >>> count_attention_cost(dense, 5, 480) // count_attention_cost(dense, 1, 480)
        25
    """
    attn = cfg.attn
    if cfg.attention == "dense":
        if cfg.mode == "spatial":
            per_layer = f * 2 * N * N * attn.embed_dims
        else:
            per_layer = 2 * (f * N) ** 2 * attn.embed_dims
    else:
        slots = attn.num_levels * attn.num_points
        if cfg.mode == "spatiotemporal":
            slots *= f
        per_layer = f * N * attn.num_heads * slots * attn.head_dims

    return cfg.layers * per_layer
