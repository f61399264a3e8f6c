"""Set matching between predicted and ground-truth poses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
from scipy.optimize import linear_sum_assignment
from torch import Tensor

from apps.pavenet.core.errors import DimensionError, MatchingError
from apps.pavenet.models.structures import PosePrediction, PoseTarget


@dataclass
class MatchResult:
    """One-to-one assignment of one sample.

    ``pairs`` holds (prediction index, ground-truth index) sorted by
    prediction index; ``unmatched`` the background predictions.
    """

    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched: list[int] = field(default_factory=list)

    @property
    def num_matches(self) -> int:
        return len(self.pairs)

    @property
    def pred_indices(self) -> Tensor:
        return torch.as_tensor([p for p, _ in self.pairs], dtype=torch.int64)

    @property
    def gt_indices(self) -> Tensor:
        return torch.as_tensor([g for _, g in self.pairs], dtype=torch.int64)


def pose_cost_matrix(
    poses: Tensor,
    scores: Tensor,
    joints: Tensor,
    visible: Tensor,
    cls_weight: float = 0.5,
    rle_weight: float = 1.0,
) -> Tensor:
    """Matching cost of every prediction against every ground truth.

    ``cls_weight * (1 - score) + rle_weight * mean_j |pred_j - gt_j|_1``, the
    mean taken over the visible joints of the ground truth. A ground truth
    with no visible joint only pays the classification term.

    Args:
        poses (Tensor): predicted poses of shape (M, J, 2).
        scores (Tensor): confidences in [0, 1] of shape (M,).
        joints (Tensor): ground-truth poses of shape (G, J, 2).
        visible (Tensor): ground-truth visibility of shape (G, J).
        cls_weight (float, optional): classification weight. Defaults to 0.5.
        rle_weight (float, optional): regression weight. Defaults to 1.0.

    Returns:
        Tensor: cost matrix of shape (M, G).

    Raises:
        DimensionError: if the joint counts differ.
    """
    if poses.shape[-2:] != joints.shape[-2:]:
        raise DimensionError(
            f"predicted and ground-truth poses should have the same joints, but got {tuple(poses.shape)} and {tuple(joints.shape)}"
        )

    distance = (poses[:, None] - joints[None]).abs().sum(-1)
    mask = visible[None].to(distance.dtype)
    mean_l1 = (distance * mask).sum(-1) / mask.sum(-1).clamp(min=1)

    return cls_weight * (1 - scores)[:, None] + rle_weight * mean_l1


def match_cost(
    pose: Tensor,
    score: float,
    gt: Tensor,
    visible: Tensor | None = None,
    cls_weight: float = 0.5,
    rle_weight: float = 1.0,
) -> float:
    """Cost of a single prediction (J, 2) with ``score`` against one ground
    truth (J, 2); every joint counts as visible when ``visible`` is None."""
    if visible is None:
        visible = torch.ones(gt.shape[0], dtype=torch.bool)
    cost = pose_cost_matrix(
        pose[None],
        torch.as_tensor([score], dtype=pose.dtype),
        gt[None],
        visible[None],
        cls_weight=cls_weight,
        rle_weight=rle_weight,
    )

    return float(cost[0, 0])


def hungarian_match(cost: Tensor | np.ndarray) -> MatchResult:
    """Exact minimum-cost assignment of every ground truth to a prediction.

    Args:
        cost (Tensor | np.ndarray): cost matrix of shape (M, G).

    Returns:
        MatchResult: G pairs and M - G background predictions.

    Raises:
        MatchingError: if G > M or a cost is not finite.
    """
    cost = torch.as_tensor(cost).detach().cpu().numpy()
    if cost.ndim != 2:
        raise DimensionError(f"cost should be a matrix, but got shape {cost.shape}")

    num_preds, num_gts = cost.shape
    if num_gts > num_preds:
        raise MatchingError(
            f"ground truths should not outnumber predictions, but got {num_gts} > {num_preds}"
        )
    if not np.isfinite(cost).all():
        raise MatchingError("matching costs should be finite")

    if num_gts == 0:
        return MatchResult(pairs=[], unmatched=list(range(num_preds)))

    rows, cols = linear_sum_assignment(cost)
    pairs = sorted(zip(rows.tolist(), cols.tolist()))
    matched = set(rows.tolist())

    return MatchResult(
        pairs=pairs, unmatched=[i for i in range(num_preds) if i not in matched]
    )


class HungarianMatcher(nn.Module):
    """Matches every sample of a batched prediction to its ground truth.

    Args:
        cls_weight (float, optional): classification weight of the cost.
            Defaults to 0.5.
        rle_weight (float, optional): regression weight of the cost.
            Defaults to 1.0.
    """

    def __init__(self, cls_weight: float = 0.5, rle_weight: float = 1.0) -> None:
        super().__init__()

        self.cls_weight = cls_weight
        self.rle_weight = rle_weight

    @torch.no_grad()
    def forward(
        self, prediction: PosePrediction, targets: list[PoseTarget]
    ) -> list[MatchResult]:
        if len(targets) != prediction.poses.shape[0]:
            raise DimensionError(
                f"expected {prediction.poses.shape[0]} targets, but got {len(targets)}"
            )

        scores = prediction.scores
        results = []
        for poses, score, target in zip(prediction.poses, scores, targets):
            cost = pose_cost_matrix(
                poses,
                score,
                target.joints.to(poses),
                target.visible,
                cls_weight=self.cls_weight,
                rle_weight=self.rle_weight,
            )
            results.append(hungarian_match(cost))

        return results
