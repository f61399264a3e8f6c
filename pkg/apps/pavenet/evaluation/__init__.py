from apps.pavenet.evaluation.matching import Correspondence, match_poses_to_gt
from apps.pavenet.evaluation.metrics import (
    compute_ap,
    compute_map,
    evaluate,
    group_ap,
    keypoint_detections,
    precision_recall_curve,
)
from apps.pavenet.evaluation.overlays import draw_overlay, write_overlay
from apps.pavenet.evaluation.posetrack import (
    parse_posetrack_json,
    write_posetrack_json,
    write_predictions,
)
from apps.pavenet.evaluation.report import EvalReport, read_report, write_report
from apps.pavenet.evaluation.structures import AnnotationSet, ImageAnnotations, PoseSet


__all__ = [
    "Correspondence",
    "match_poses_to_gt",
    "compute_ap",
    "compute_map",
    "evaluate",
    "group_ap",
    "keypoint_detections",
    "precision_recall_curve",
    "draw_overlay",
    "write_overlay",
    "parse_posetrack_json",
    "write_posetrack_json",
    "write_predictions",
    "EvalReport",
    "read_report",
    "write_report",
    "AnnotationSet",
    "ImageAnnotations",
    "PoseSet",
]
