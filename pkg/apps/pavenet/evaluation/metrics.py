"""Per-keypoint average precision."""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping

import numpy as np

from apps.pavenet.data.skeleton import JOINT_GROUPS, JOINT_NAMES
from apps.pavenet.evaluation.matching import RADIUS_FRACTION, match_poses_to_gt
from apps.pavenet.evaluation.report import EvalReport, KeypointCurve
from apps.pavenet.evaluation.structures import AnnotationSet, PoseSet


logger = logging.getLogger(name=__name__)

Detection = tuple[float, bool]


def precision_recall_curve(
    detections: Iterable[Detection], total_gt: int
) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall after each detection, by descending confidence
    (ties keep input order)."""
    detections = list(detections)
    if not detections:
        return np.zeros(0), np.zeros(0)

    confidence = np.array([c for c, _ in detections], dtype=np.float64)
    correct = np.array([ok for _, ok in detections], dtype=np.float64)
    order = np.argsort(-confidence, kind="stable")
    true_positives = np.cumsum(correct[order])

    precision = true_positives / np.arange(1, len(detections) + 1)
    recall = true_positives / max(total_gt, 1)

    return precision, recall


def compute_ap(detections: Iterable[Detection], total_gt: int) -> float:
    """Area under the all-point interpolated precision-recall curve.

    With no ground truth the AP is 1.0 when there are no detections either
    and 0.0 otherwise.

    Args:
        detections (Iterable[tuple[float, bool]]): (confidence, correct)
            pairs.
        total_gt (int): ground-truth joints.

    Returns:
        float: AP in [0, 1].

    Example:
        >>> compute_ap([(0.9, True), (0.8, False), (0.7, True)], total_gt=2)
        0.8333333333333333
    """
    if total_gt < 0:
        raise ValueError(f"total_gt should be non-negative, but got {total_gt}")

    detections = list(detections)
    if total_gt == 0:
        return 0.0 if detections else 1.0

    precision, recall = precision_recall_curve(detections, total_gt)
    if not len(precision):
        return 0.0

    recall = np.concatenate([[0.0], recall])
    precision = np.concatenate([[0.0], precision])
    # interpolated precision: best precision at any higher recall
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.flatnonzero(recall[1:] != recall[:-1]) + 1

    return float(np.sum((recall[steps] - recall[steps - 1]) * precision[steps]))


def compute_map(aps: Mapping[str, float] | Iterable[float]) -> float:
    values = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    return float(np.mean(values)) if values else 0.0


def group_ap(
    keypoint_ap: Mapping[str, float],
    keypoint_names: tuple[str, ...],
    groups: Mapping[str, tuple[int, ...]] = JOINT_GROUPS,
) -> dict[str, float]:
    """Mean AP of each joint group plus ``"Mean"``, the mAP over all
    keypoints."""
    row = {
        group: compute_map(keypoint_ap[keypoint_names[j]] for j in joints)
        for group, joints in groups.items()
    }
    row["Mean"] = compute_map(keypoint_ap)

    return row


def keypoint_detections(
    preds: PoseSet, gts: PoseSet, radius_fraction: float = RADIUS_FRACTION
) -> tuple[list[list[Detection]], np.ndarray, tuple[int, int, int]]:
    """Scored joint detections of one image.

    A predicted joint is correct when its pose is matched and it lies within
    the radius of the matched ground-truth joint, which must be visible. A
    joint matched to a hidden ground-truth joint is a wrong detection; joints
    the prediction itself marks invisible are not detections.

    Returns:
        tuple: detections per keypoint, visible ground truth per keypoint
        and (matched, missed, false positive) pose counts.
    """
    num_joints = gts.poses.shape[1] if len(gts) else preds.poses.shape[1]
    correspondence = match_poses_to_gt(preds, gts, radius_fraction)
    gt_of = correspondence.gt_of()
    radius = radius_fraction * gts.figure_heights()

    detections: list[list[Detection]] = [[] for _ in range(num_joints)]
    for p in range(len(preds)):
        score = float(preds.scores[p])
        g = gt_of.get(p)
        for j in range(num_joints):
            if not preds.visible[p, j]:
                continue
            if g is None or not gts.visible[g, j]:
                detections[j].append((score, False))
            else:
                distance = np.linalg.norm(preds.poses[p, j] - gts.poses[g, j])
                detections[j].append((score, bool(distance <= radius[g])))

    total_gt = gts.visible.sum(0) if len(gts) else np.zeros(num_joints, dtype=int)
    counts = (
        len(correspondence.pairs),
        len(correspondence.missed),
        len(correspondence.unmatched),
    )

    return detections, total_gt, counts


def evaluate(
    gt: AnnotationSet,
    pred: AnnotationSet,
    radius_fraction: float = RADIUS_FRACTION,
) -> EvalReport:
    """Scores predictions against ground truth, image by image.

    Images without predictions count as empty predictions. Joint groups are
    reported for the default skeleton only; other files get just ``"Mean"``.
    """
    names = gt.keypoint_names
    detections: list[list[Detection]] = [[] for _ in names]
    total_gt = np.zeros(len(names), dtype=int)
    matched = missed = false_positives = 0

    predictions = pred.by_id()
    for image in gt.images:
        predicted = predictions.get(image.image_id)
        preds = predicted.poses if predicted is not None else PoseSet.empty(len(names))
        image_detections, image_total, counts = keypoint_detections(
            preds, image.poses, radius_fraction
        )
        for j, items in enumerate(image_detections):
            detections[j].extend(items)
        total_gt += image_total
        matched += counts[0]
        missed += counts[1]
        false_positives += counts[2]

    keypoint_ap, curves = {}, {}
    for name, items, total in zip(names, detections, total_gt.tolist()):
        keypoint_ap[name] = compute_ap(items, total)
        precision, recall = precision_recall_curve(items, total)
        curves[name] = KeypointCurve(precision=precision.tolist(), recall=recall.tolist())

    report = EvalReport(
        keypoint_ap=keypoint_ap,
        mean_ap=compute_map(keypoint_ap),
        group_ap=group_ap(keypoint_ap, names, JOINT_GROUPS if names == JOINT_NAMES else {}),
        curves=curves,
        matched=matched,
        missed=missed,
        false_positives=false_positives,
        radius_fraction=radius_fraction,
    )
    logger.info(f"evaluated {len(gt.images)} images: mAP {report.mean_ap:.4f}")

    return report
