"""Degradations applied to rendered clips: motion blur and occluders."""
from __future__ import annotations

import logging
from typing import Literal

import cv2
import numpy as np

from apps.pavenet.data.synth import ClipSample, FigureSpec


logger = logging.getLogger(name=__name__)

CorruptionMode = Literal["blur", "occluder"]

BLUR_MAX_LENGTH = 9
OCCLUDER_COLOR = (128, 128, 128)


def motion_kernel(direction: tuple[float, float], length: int) -> np.ndarray:
    """Normalised line kernel of odd ``length`` along ``direction``
    (horizontal for a zero vector)."""
    if length <= 1:
        return np.ones((1, 1), dtype=np.float64)

    vector = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    vector = vector / norm if norm > 0 else np.array([1.0, 0.0])

    center = (length - 1) / 2
    start = np.rint(center - vector * center).astype(int)
    end = np.rint(center + vector * center).astype(int)
    kernel = np.zeros((length, length), dtype=np.float32)
    cv2.line(kernel, tuple(start.tolist()), tuple(end.tolist()), 1.0, 1, cv2.LINE_8)

    kernel = kernel.astype(np.float64)
    return kernel / kernel.sum()


def blur_length(severity: float) -> int:
    return 1 + 2 * int(round(severity * (BLUR_MAX_LENGTH // 2)))


def blur_frame(
    frame: np.ndarray,
    masks: np.ndarray,
    figures: list[FigureSpec],
    severity: float,
) -> np.ndarray:
    """Blurs every figure along its own motion direction.

    Each figure's region (its body mask grown by the kernel size) is
    replaced by the frame filtered with that figure's kernel; the kernel is
    normalised and borders are replicated, so intensity is moved, not lost.
    """
    length = blur_length(severity)
    source = frame.astype(np.float64)
    out = source.copy()
    grow = np.ones((length + 2, length + 2), dtype=np.uint8)

    for figure, mask in zip(figures, masks):
        kernel = motion_kernel(figure.velocity, length)
        blurred = cv2.filter2D(source, -1, kernel, borderType=cv2.BORDER_REPLICATE)
        region = cv2.dilate(mask.astype(np.uint8), grow) > 0
        out[region] = blurred[region]

    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _occlude(clip: ClipSample, severity: float, seed: int) -> ClipSample:
    out = clip.copy()
    rng = np.random.default_rng(seed)
    key = clip.keyframe
    height, width = clip.image_size

    person = int(rng.integers(clip.num_persons))
    pixels = clip.pixel_joints()[key, person]
    x0, y0 = np.clip(np.floor(pixels.min(0)), 0, [width - 1, height - 1]).astype(int)
    x1, y1 = np.clip(np.ceil(pixels.max(0)), 0, [width - 1, height - 1]).astype(int)

    box_w, box_h = x1 - x0 + 1, y1 - y0 + 1
    rect_w = max(1, int(round(severity * box_w)))
    rect_h = max(1, int(round(severity * box_h)))
    left = int(x0 + rng.integers(0, box_w - rect_w + 1))
    top = int(y0 + rng.integers(0, box_h - rect_h + 1))
    right, bottom = left + rect_w - 1, top + rect_h - 1

    frame = out.frames[key].copy()
    cv2.rectangle(frame, (left, top), (right, bottom), OCCLUDER_COLOR, -1)
    out.frames[key] = frame

    columns = np.rint(clip.pixel_joints()[key, ..., 0])
    rows = np.rint(clip.pixel_joints()[key, ..., 1])
    covered = (columns >= left) & (columns <= right) & (rows >= top) & (rows <= bottom)
    out.visible[key] = out.visible[key] & ~covered
    out.occluder = (left, top, right, bottom)

    return out


def corrupt_clip(
    clip: ClipSample,
    mode: CorruptionMode,
    severity: float,
    seed: int = 0,
    keyframe_only: bool = True,
) -> ClipSample:
    """Returns a degraded copy of ``clip``; ground-truth coordinates are
    unchanged.

    Args:
        clip (ClipSample): clean clip.
        mode (str): ``"blur"`` (motion blur along each figure's velocity,
            kernel length growing with severity) or ``"occluder"`` (a
            rectangle over part of a random person on the keyframe only).
        severity (float): strength in [0, 1]; 0 returns an identical copy.
        seed (int, optional): seed of the occluder placement. Defaults to 0.
        keyframe_only (bool, optional): blur only the keyframe, leaving the
            auxiliary frames clean. Defaults to True.

    Returns:
        ClipSample: corrupted clip; occluded joints are marked invisible.
    """
    if not 0.0 <= severity <= 1.0:
        raise ValueError(f"severity should be in [0, 1], but got {severity}")
    if mode not in ("blur", "occluder"):
        raise ValueError(f"mode should be 'blur' or 'occluder', but got {mode!r}")

    if severity == 0:
        return clip.copy()

    if mode == "occluder":
        return _occlude(clip, severity, seed)

    out = clip.copy()
    frames = [clip.keyframe] if keyframe_only else range(clip.num_frames)
    for t in frames:
        out.frames[t] = blur_frame(clip.frames[t], clip.masks[t], clip.figures, severity)
    logger.debug(f"blurred {len(frames)} frame(s) with kernel {blur_length(severity)}")

    return out
