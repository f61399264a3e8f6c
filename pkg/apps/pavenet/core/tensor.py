"""Validated tensor primitives on top of the torch autograd engine.

All numeric arrays are ``torch.float64`` tensors. The operation record that
reverse mode replays is the autograd graph: ``backward`` walks it once in
reverse topological order. The helpers below add the shape checks and error
messages the model code relies on, and a central finite-difference checker
used to validate every differentiable block.
"""
from __future__ import annotations

from typing import Callable

import torch
import torch.nn.functional as F
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.settings import debug_enabled


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a @ b`` with an explicit inner-dimension check.

    Leading dimensions broadcast with the usual trailing-dimension rules.

    Args:
        a (Tensor): tensor of shape (..., m, k).
        b (Tensor): tensor of shape (..., k, n).

    Returns:
        Tensor: tensor of shape (..., m, n).

    Raises:
        DimensionError: if inner dimensions differ.

    Example:
        >>> matmul(torch.eye(3, dtype=torch.float64), a) # returns a
    """
    if a.dim() < 2 or b.dim() < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions should be equal, but got {tuple(a.shape)} and {tuple(b.shape)}"
        )

    return torch.matmul(a, b)


def softmax(x: Tensor, axis: int) -> Tensor:
    """Softmax along ``axis``, stabilised by subtracting the maximum."""
    if not -x.dim() <= axis < x.dim():
        raise DimensionError(
            f"softmax axis {axis} is out of range for shape {tuple(x.shape)}"
        )
    if x.shape[axis] == 0:
        raise DimensionError(
            f"softmax over an empty axis {axis} of shape {tuple(x.shape)}"
        )

    return torch.softmax(x, dim=axis)


def layer_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    """Normalises the last dimension to zero mean / unit variance, then
    applies ``gamma * x_hat + beta``.

    Args:
        x (Tensor): tensor of shape (..., D).
        gamma (Tensor): scale of shape (D,).
        beta (Tensor): shift of shape (D,).
        eps (float, optional): variance floor. Defaults to 1e-5.

    Raises:
        DimensionError: if the last dimension of ``x`` is not D.
    """
    width = x.shape[-1] if x.dim() > 0 else 0
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError(
            f"layer_norm width should be {width}, but got gamma {tuple(gamma.shape)} and beta {tuple(beta.shape)}"
        )

    return F.layer_norm(x, (width,), weight=gamma, bias=beta, eps=eps)


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Populates ``.grad`` on every leaf that requires gradients."""
    if loss.dim() != 0:
        raise ValueError(
            f"backward expects a scalar loss, but got shape {tuple(loss.shape)}"
        )
    if not loss.requires_grad:
        raise ValueError("loss is not reachable from any tracked tensor")

    loss.backward(retain_graph=retain_graph)


def finite_difference_check(
    fn: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-5,
    *,
    max_coords: int | None = None,
    seed: int = 0,
    floor: float = 1e-8,
) -> float:
    """Compares the autograd gradient of a scalar function with central
    differences.

    Args:
        fn (Callable[[Tensor], Tensor]): deterministic function returning a
            scalar tensor.
        x (Tensor): point to check at; converted to float64.
        eps (float, optional): finite-difference step. Defaults to 1e-5.
        max_coords (int | None, optional): check a seeded random subset of at
            most this many coordinates. Defaults to None (all coordinates).
        seed (int, optional): seed of the coordinate subset. Defaults to 0.
        floor (float, optional): added to ``|grad|`` in the denominator; raise
            it for parameters whose gradients sit near zero. Defaults to 1e-8.

    Returns:
        float: largest ``|numeric - grad| / (|grad| + floor)`` over the
        checked coordinates.
    """
    base = x.detach().to(torch.float64).clone()
    probe = base.clone().requires_grad_(True)
    out = fn(probe)
    if out.numel() != 1:
        raise ValueError(
            f"finite_difference_check expects a scalar function, but got shape {tuple(out.shape)}"
        )
    (grad,) = torch.autograd.grad(out.reshape(()), probe, allow_unused=True)
    if grad is None:
        grad = torch.zeros_like(base)
    grad = grad.reshape(-1)

    coords = torch.arange(base.numel())
    if max_coords is not None and max_coords < base.numel():
        generator = torch.Generator().manual_seed(seed)
        coords = torch.randperm(base.numel(), generator=generator)[:max_coords]

    flat = base.reshape(-1)
    worst = 0.0
    with torch.no_grad():
        for index in coords.tolist():
            plus = flat.clone()
            plus[index] += eps
            minus = flat.clone()
            minus[index] -= eps

            upper = fn(plus.view_as(base)).item()
            lower = fn(minus.view_as(base)).item()
            numeric = (upper - lower) / (2 * eps)
            analytic = grad[index].item()

            worst = max(worst, abs(numeric - analytic) / (abs(analytic) + floor))

    return worst


def assert_finite(tensor: Tensor, name: str) -> Tensor:
    """Raises on NaN/Inf when ``PAVENET_DEBUG`` is set, otherwise a no-op."""
    if debug_enabled() and not bool(torch.isfinite(tensor).all()):
        raise FloatingPointError(f"non-finite values in {name}")

    return tensor
