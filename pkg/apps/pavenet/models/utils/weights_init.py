from __future__ import annotations

import math
from typing import Callable

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor


def _apply(
    module: nn.Module, fill_weight: Callable[[Tensor], object], bias: float
) -> None:
    weight = getattr(module, "weight", None)
    if weight is not None:
        fill_weight(weight)
    if getattr(module, "bias", None) is not None:
        nn.init.constant_(module.bias, bias)  # type: ignore[arg-type]


def constant_init(module: nn.Module, val: float, bias: float = 0) -> None:
    _apply(module, lambda w: nn.init.constant_(w, val), bias)


def xavier_init(
    module: nn.Module,
    gain: float = 1,
    bias: float = 0,
    distribution: str = "uniform",
) -> None:
    fills = {"uniform": nn.init.xavier_uniform_, "normal": nn.init.xavier_normal_}
    if distribution not in fills:
        raise NotImplementedError(
            f"xavier distribution should be one of {sorted(fills)}, but got {distribution}"
        )

    _apply(module, lambda w: fills[distribution](w, gain=gain), bias)


def kaiming_init(
    module: nn.Module,
    mode: str = "fan_out",
    nonlinearity: str = "relu",
    bias: float = 0,
) -> None:
    _apply(
        module,
        lambda w: nn.init.kaiming_normal_(w, mode=mode, nonlinearity=nonlinearity),
        bias,
    )


def bias_init_with_prob(prior_prob: float) -> float:
    """Bias whose sigmoid equals ``prior_prob``."""
    return float(np.log(prior_prob / (1.0 - prior_prob)))


def trunc_normal_(tensor: Tensor, std: float = 0.02, bound: float = 2.0) -> Tensor:
    """Normal fill clipped to ``[-bound * std, bound * std]``."""
    return nn.init.trunc_normal_(tensor, std=std, a=-bound * std, b=bound * std)


def ring_offsets(num_heads: int, num_points: int) -> Tensor:
    """Initial sampling offsets: head ``h`` points along angle ``2 pi h / num_heads``
    and point ``k`` sits ``k + 1`` pixels away from the reference.

    Returns:
        Tensor: offsets of shape (num_heads, num_points, 2) in pixels.
    """
    angles = torch.arange(num_heads, dtype=torch.float64) * (
        2.0 * math.pi / num_heads
    )
    directions = torch.stack([angles.cos(), angles.sin()], dim=-1)
    directions = directions / directions.abs().max(dim=-1, keepdim=True).values
    scales = torch.arange(1, num_points + 1, dtype=torch.float64)

    return directions[:, None, :] * scales[None, :, None]
