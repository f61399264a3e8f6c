from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np

from apps.pavenet.data.skeleton import LIMBS
from apps.pavenet.evaluation.structures import PoseSet


logger = logging.getLogger(name=__name__)

GT_COLOR = (0, 255, 0)
PRED_COLOR = (0, 0, 255)


def _draw_poses(image: np.ndarray, poses: PoseSet, color: tuple[int, int, int]) -> None:
    for pose, visible in zip(poses.poses, poses.visible):
        points = [tuple(int(v) for v in np.rint(p)) for p in pose]
        for a, b in LIMBS:
            if visible[a] and visible[b]:
                cv2.line(image, points[a], points[b], color, 1, cv2.LINE_AA)
        for point, flag in zip(points, visible):
            if flag:
                cv2.circle(image, point, 2, color, -1, cv2.LINE_8)


def draw_overlay(
    image: np.ndarray,
    gt: PoseSet,
    pred: PoseSet,
    threshold: float = 0.3,
    scale: int = 4,
) -> np.ndarray:
    """Keyframe with ground truth (green) and predictions above
    ``threshold`` (red), upscaled by ``scale`` for viewing.

    Args:
        image (np.ndarray): BGR ``uint8`` keyframe (H, W, 3).
        gt (PoseSet): ground truth in pixels.
        pred (PoseSet): predictions in pixels.
        threshold (float, optional): minimum prediction score.
            Defaults to 0.3.
        scale (int, optional): upscaling factor. Defaults to 4.
    """
    height, width = image.shape[:2]
    canvas = cv2.resize(image, (width * scale, height * scale), interpolation=cv2.INTER_NEAREST)

    def scaled(poses: PoseSet) -> PoseSet:
        return PoseSet(
            poses=poses.poses * scale, visible=poses.visible, scores=poses.scores
        )

    _draw_poses(canvas, scaled(gt), GT_COLOR)
    shown = pred.above(threshold)
    # predictions carry no visibility: draw every joint
    _draw_poses(
        canvas,
        PoseSet(poses=shown.poses * scale, visible=np.ones(shown.visible.shape, dtype=bool)),
        PRED_COLOR,
    )

    return canvas


def write_overlay(path: str | Path, image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), image):
        raise OSError(f"could not write overlay {path}")
    logger.debug(f"overlay written to {path}")
