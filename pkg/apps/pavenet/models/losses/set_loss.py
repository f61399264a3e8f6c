"""Set-based training loss: focal classification plus Laplace RLE regression,
matched independently for every supervised stage."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import Tensor
from torchvision.ops import sigmoid_focal_loss

from apps.pavenet.models.losses.matcher import HungarianMatcher, MatchResult
from apps.pavenet.models.structures import PosePrediction, PoseTarget


FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0


def rle_loss(
    mu: Tensor,
    b: Tensor,
    gt: Tensor,
    visible: Tensor | None = None,
    num_matches: int | None = None,
) -> Tensor:
    """Laplace negative log-likelihood ``log(2b) + |mu - gt| / b``.

    Summed over joints and coordinates, then divided by the number of
    matches.

    Args:
        mu (Tensor): predicted coordinates, (K, J, 2) for K matched poses or
            any shape for a single term.
        b (Tensor): positive scales, same shape as ``mu``.
        gt (Tensor): ground-truth coordinates, same shape as ``mu``.
        visible (Tensor | None, optional): joint mask of shape (K, J); hidden
            joints do not contribute. Defaults to None.
        num_matches (int | None, optional): divisor. Defaults to K for
            (K, J, 2) inputs and 1 otherwise.

    Returns:
        Tensor: scalar loss.

    Raises:
        ValueError: if any scale is not positive.
    """
    if (b <= 0).any():
        raise ValueError(f"RLE scales should be positive, but got min {float(b.min())}")

    nll = torch.log(2 * b) + (mu - gt).abs() / b
    if visible is not None:
        nll = nll * visible[..., None].to(nll.dtype)
    if num_matches is None:
        num_matches = mu.shape[0] if mu.dim() >= 3 else 1

    return nll.sum() / max(num_matches, 1)


def cls_loss(logits: Tensor, match: MatchResult, num_gt: int | None = None) -> Tensor:
    """Sigmoid focal loss over the M query logits of one sample.

    Matched queries have target 1, background queries 0. The sum is divided
    by ``num_gt`` (the matched count when None), at least 1.
    """
    targets = torch.zeros_like(logits)
    if match.pairs:
        targets[match.pred_indices] = 1.0
    loss = sigmoid_focal_loss(
        logits, targets, alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA, reduction="sum"
    )
    if num_gt is None:
        num_gt = match.num_matches

    return loss / max(num_gt, 1)


@dataclass
class LossBreakdown:
    """Weighted total plus the per-stage classification and regression terms.

    ``total == cls_weight * sum(cls) + rle_weight * sum(rle)``.
    """

    total: Tensor
    cls: list[Tensor] = field(default_factory=list)
    rle: list[Tensor] = field(default_factory=list)
    cls_weight: float = 0.5
    rle_weight: float = 1.0

    @classmethod
    def combine(
        cls,
        cls_terms: list[Tensor],
        rle_terms: list[Tensor],
        cls_weight: float = 0.5,
        rle_weight: float = 1.0,
    ) -> LossBreakdown:
        cls_terms = [torch.as_tensor(t, dtype=torch.float64) for t in cls_terms]
        rle_terms = [torch.as_tensor(t, dtype=torch.float64) for t in rle_terms]
        total = cls_weight * sum(cls_terms, torch.tensor(0.0, dtype=torch.float64))
        total = total + rle_weight * sum(rle_terms, torch.tensor(0.0, dtype=torch.float64))

        return cls(
            total=total,
            cls=cls_terms,
            rle=rle_terms,
            cls_weight=cls_weight,
            rle_weight=rle_weight,
        )

    @property
    def num_stages(self) -> int:
        return len(self.cls)

    def as_row(self) -> dict[str, float]:
        row = {"total": float(self.total)}
        for i, (c, r) in enumerate(zip(self.cls, self.rle)):
            row[f"cls_{i}"] = float(c)
            row[f"rle_{i}"] = float(r)

        return row


def stage_loss(
    stage: PosePrediction,
    targets: list[PoseTarget],
    matches: list[MatchResult],
) -> tuple[Tensor, Tensor]:
    """Classification and regression terms of one batched stage."""
    num_gt = sum(t.num_persons for t in targets)
    num_matches = sum(m.num_matches for m in matches)

    cls_term = stage.logits.new_zeros(())
    rle_term = stage.logits.new_zeros(())
    for b, (target, match) in enumerate(zip(targets, matches)):
        cls_term = cls_term + cls_loss(stage.logits[b], match, num_gt=num_gt)
        if not match.pairs:
            continue

        pred, gt = match.pred_indices, match.gt_indices
        rle_term = rle_term + rle_loss(
            stage.poses[b, pred],
            stage.scales[b, pred],
            target.joints[gt].to(stage.poses),
            visible=target.visible[gt],
            num_matches=num_matches,
        )

    return cls_term, rle_term


def total_loss(
    stages: list[PosePrediction],
    targets: list[PoseTarget],
    cls_weight: float = 0.5,
    rle_weight: float = 1.0,
) -> LossBreakdown:
    """Deep-supervised loss over every stage, each matched on its own.

    Args:
        stages (list[PosePrediction]): supervised predictions in order.
        targets (list[PoseTarget]): one target per batch item.
        cls_weight (float, optional): classification weight. Defaults to 0.5.
        rle_weight (float, optional): regression weight. Defaults to 1.0.

    Returns:
        LossBreakdown: differentiable total plus per-stage terms.

    Raises:
        ValueError: if there is no stage.
    """
    if not stages:
        raise ValueError("loss needs at least one supervised stage")

    matcher = HungarianMatcher(cls_weight=cls_weight, rle_weight=rle_weight)
    cls_terms, rle_terms = [], []
    for stage in stages:
        cls_term, rle_term = stage_loss(stage, targets, matcher(stage, targets))
        cls_terms.append(cls_term)
        rle_terms.append(rle_term)

    total = cls_weight * torch.stack(cls_terms).sum() + rle_weight * torch.stack(
        rle_terms
    ).sum()

    return LossBreakdown(
        total=total,
        cls=cls_terms,
        rle=rle_terms,
        cls_weight=cls_weight,
        rle_weight=rle_weight,
    )
