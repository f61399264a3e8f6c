from apps.pavenet.models.losses.matcher import (
    HungarianMatcher,
    MatchResult,
    hungarian_match,
    match_cost,
    pose_cost_matrix,
)
from apps.pavenet.models.losses.set_loss import (
    LossBreakdown,
    cls_loss,
    rle_loss,
    stage_loss,
    total_loss,
)


__all__ = [
    "HungarianMatcher",
    "MatchResult",
    "hungarian_match",
    "match_cost",
    "pose_cost_matrix",
    "LossBreakdown",
    "cls_loss",
    "rle_loss",
    "stage_loss",
    "total_loss",
]
