"""Greedy pose-to-ground-truth correspondence for keypoint AP."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from apps.pavenet.evaluation.structures import PoseSet


RADIUS_FRACTION = 0.1


@dataclass
class Correspondence:
    """``pairs`` are (prediction, ground truth) indices in the order they
    were claimed."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched: list[int] = field(default_factory=list)
    missed: list[int] = field(default_factory=list)

    def gt_of(self) -> dict[int, int]:
        return dict(self.pairs)


def joint_hits(pred: np.ndarray, gt: PoseSet, radius_fraction: float) -> np.ndarray:
    """Visible ground-truth joints within the correctness radius of ``pred``.

    Args:
        pred (np.ndarray): one predicted pose (J, 2).
        gt (PoseSet): ground truth of the image.
        radius_fraction (float): radius as a fraction of figure height.

    Returns:
        np.ndarray: boolean hits of shape (G, J).
    """
    radius = radius_fraction * gt.figure_heights()
    distance = np.linalg.norm(gt.poses - pred[None], axis=-1)

    return gt.visible & (distance <= radius[:, None])


def match_poses_to_gt(
    preds: PoseSet, gts: PoseSet, radius_fraction: float = RADIUS_FRACTION
) -> Correspondence:
    """Matches predictions to ground truth greedily by confidence.

    Predictions are visited by descending confidence (ties keep input
    order); each claims the unclaimed ground truth with the most visible
    joints within ``radius_fraction`` times its figure height, lowest index
    on ties, if at least one joint is within the radius.

    Raises:
        ValueError: if ``radius_fraction`` is not positive.
    """
    if radius_fraction <= 0:
        raise ValueError(f"radius_fraction should be positive, but got {radius_fraction}")

    order = np.argsort(-preds.scores, kind="stable")
    claimed = np.zeros(len(gts), dtype=bool)
    result = Correspondence()

    for p in order.tolist():
        if not len(gts):
            result.unmatched.append(p)
            continue
        counts = joint_hits(preds.poses[p], gts, radius_fraction).sum(-1)
        counts[claimed] = 0
        best = int(np.argmax(counts))
        if counts[best] < 1:
            result.unmatched.append(p)
            continue
        claimed[best] = True
        result.pairs.append((p, best))

    result.missed = np.flatnonzero(~claimed).tolist()

    return result
