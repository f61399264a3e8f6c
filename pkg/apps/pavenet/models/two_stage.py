"""Top-down reference pipeline used by the inference benchmark.

Every ground-truth person is cropped from every frame with a fixed window and
passed through its own single-person forward, so the cost grows with the
number of people in the scene.
"""
from __future__ import annotations

import logging

import torch
import torch.nn.functional as F
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.config import ModelConfig
from apps.pavenet.models.e2e import PaveNet


logger = logging.getLogger(name=__name__)

CROP_SIZE = 32


def single_person_config(cfg: ModelConfig, crop_size: int = CROP_SIZE) -> ModelConfig:
    """Single-query, no-joint-decoder copy of ``cfg`` for square crops."""
    return cfg.copy(
        update=dict(
            image_size=(crop_size, crop_size),
            num_queries=1,
            use_stjd=False,
            decoder="pose-aware",
            reference="top-m",
        )
    )


def crop_windows(frames: Tensor, centers: Tensor, crop_size: int = CROP_SIZE) -> Tensor:
    """Fixed-size crops around every centre, replicate-padded at the borders.

    Args:
        frames (Tensor): clip of shape (f, 3, H, W).
        centers (Tensor): pixel centres (x, y) of shape (P, 2).
        crop_size (int, optional): crop side. Defaults to 32.

    Returns:
        Tensor: crops of shape (P, f, 3, crop_size, crop_size).
    """
    if frames.dim() != 4:
        raise DimensionError(
            f"frames should have shape (f, 3, H, W), but got {tuple(frames.shape)}"
        )
    half = crop_size // 2
    padded = F.pad(frames, (half, half, half, half), mode="replicate")

    crops = []
    for x, y in torch.round(centers).to(torch.int64).tolist():
        crops.append(padded[..., y : y + crop_size, x : x + crop_size])

    if not crops:
        return frames.new_zeros(0, frames.shape[0], 3, crop_size, crop_size)

    return torch.stack(crops)


class TwoStageReference:
    """Crop-and-estimate pipeline with ground-truth boxes instead of a
    detector.

    Args:
        cfg (ModelConfig): configuration of the end-to-end model; the crop
            model shares its widths and depths.
        crop_size (int, optional): crop side in pixels. Defaults to 32.
    """

    def __init__(self, cfg: ModelConfig, crop_size: int = CROP_SIZE) -> None:
        self.crop_size = crop_size
        self.model = PaveNet(cfg=single_person_config(cfg, crop_size)).to(
            torch.float64
        )
        self.model.eval()

    @torch.no_grad()
    def __call__(self, frames: Tensor, boxes: Tensor) -> Tensor:
        """Estimates one pose per box.

        Args:
            frames (Tensor): clip of shape (f, 3, H, W).
            boxes (Tensor): keyframe person boxes (x0, y0, x1, y1) in pixels,
                shape (P, 4).

        Returns:
            Tensor: poses of shape (P, J, 2) normalised to the full frame.
        """
        height, width = frames.shape[-2:]
        centers = (boxes[:, :2] + boxes[:, 2:]) / 2
        crops = crop_windows(frames.to(torch.float64), centers, self.crop_size)

        poses = []
        half = self.crop_size // 2
        for crop, (cx, cy) in zip(crops, torch.round(centers).tolist()):
            pose = self.model(crop[None]).final.poses[0, 0]
            origin = pose.new_tensor([cx - half, cy - half])
            pixels = pose * (self.crop_size - 1) + origin
            poses.append(pixels / pose.new_tensor([width - 1, height - 1]))

        if not poses:
            return frames.new_zeros(0, self.model.cfg.num_joints, 2, dtype=torch.float64)

        return torch.stack(poses)
