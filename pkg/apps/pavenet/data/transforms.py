"""Training-time augmentation of synthetic clips.

Every transform acts on the whole clip with one set of parameters, so all
frames stay aligned. Joints that leave the canvas become invisible.
"""
from __future__ import annotations

import cv2
import numpy as np

from apps.pavenet.data.skeleton import flip_permutation
from apps.pavenet.data.synth import ClipSample


SCALE_RANGE = (0.75, 1.25)


def _in_canvas(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    return (
        (pixels[..., 0] >= 0)
        & (pixels[..., 0] <= width - 1)
        & (pixels[..., 1] >= 0)
        & (pixels[..., 1] <= height - 1)
    )


def hflip_clip(clip: ClipSample) -> ClipSample:
    """Mirrors every frame and swaps left/right joints."""
    out = clip.copy()
    order = flip_permutation()

    out.frames = np.ascontiguousarray(clip.frames[:, :, ::-1])
    out.masks = np.ascontiguousarray(clip.masks[..., ::-1])
    joints = clip.joints[..., order, :].copy()
    joints[..., 0] = 1.0 - joints[..., 0]
    out.joints = joints
    out.visible = clip.visible[..., order].copy()

    return out


def scale_clip(clip: ClipSample, scale: float, center: tuple[float, float] | None = None) -> ClipSample:
    """Zooms every frame by ``scale`` around ``center`` (the image centre by
    default) and crops or pads back to the canvas with one affine warp."""
    height, width = clip.image_size
    if center is None:
        center = ((width - 1) / 2, (height - 1) / 2)
    cx, cy = center
    matrix = np.array(
        [[scale, 0.0, (1 - scale) * cx], [0.0, scale, (1 - scale) * cy]],
        dtype=np.float64,
    )

    out = clip.copy()
    out.frames = np.stack(
        [
            cv2.warpAffine(
                frame,
                matrix,
                (width, height),
                flags=cv2.INTER_LINEAR,
                borderMode=cv2.BORDER_REPLICATE,
            )
            for frame in clip.frames
        ]
    )
    out.masks = np.stack(
        [
            np.stack(
                [
                    cv2.warpAffine(
                        mask.astype(np.uint8), matrix, (width, height), flags=cv2.INTER_NEAREST
                    )
                    > 0
                    for mask in frame_masks
                ]
            )
            if len(frame_masks)
            else frame_masks
            for frame_masks in clip.masks
        ]
    )

    pixels = clip.pixel_joints() * scale + np.array([(1 - scale) * cx, (1 - scale) * cy])
    out.joints = pixels / np.array([width - 1, height - 1], dtype=np.float64)
    out.visible = clip.visible & _in_canvas(pixels, height, width)

    return out


def augment_clip(clip: ClipSample, rng: np.random.Generator) -> ClipSample:
    """Random horizontal flip (p = 0.5) followed by a random scale in
    [0.75, 1.25]."""
    if rng.random() < 0.5:
        clip = hflip_clip(clip)

    return scale_clip(clip, float(rng.uniform(*SCALE_RANGE)))
