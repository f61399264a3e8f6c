from __future__ import annotations

from typing import Any

import numpy as np
import torch
from torch import Tensor
from torch.utils.data import Dataset

from apps.pavenet.data.corruption import corrupt_clip
from apps.pavenet.data.synth import ClipSample, generate_clip
from apps.pavenet.data.transforms import augment_clip
from apps.pavenet.datasets.manifest import ClipRecord
from apps.pavenet.models.structures import PoseTarget


class SyntheticPoseDataset(Dataset):
    """Clips regenerated from manifest records.

    Args:
        records (list[ClipRecord]): clips of the dataset.
        augment (bool, optional): apply random flip and scale.
            Defaults to False.
        seed (int, optional): augmentation seed; with :meth:`set_step` it
            fixes the augmentation of every (step, item) pair.
            Defaults to 0.
    """

    def __init__(
        self, records: list[ClipRecord], augment: bool = False, seed: int = 0
    ) -> None:
        self.records = list(records)
        self.augment = augment
        self.seed = seed
        self.step = 0

    def __len__(self) -> int:
        return len(self.records)

    def set_step(self, step: int) -> None:
        self.step = step

    def clip(self, index: int) -> ClipSample:
        """Clean-or-corrupted clip of ``index``, without augmentation."""
        record = self.records[index]
        clip = generate_clip(
            record.seed,
            record.n_persons,
            record.difficulty,
            span=record.span,
            image_size=tuple(record.image_size),
        )
        if record.corruption is not None and record.severity > 0:
            clip = corrupt_clip(
                clip, record.corruption, record.severity, seed=record.seed
            )

        return clip

    def __getitem__(self, index: int) -> dict[str, Any]:
        clip = self.clip(index)
        if self.augment:
            rng = np.random.default_rng([self.seed, self.step, index])
            clip = augment_clip(clip, rng)

        return dict(
            frames=clip.frames_tensor(),
            target=clip.target(),
            clip_id=self.records[index].clip_id,
        )


def collate_clips(batch: list[dict[str, Any]]) -> tuple[Tensor, list[PoseTarget], list[str]]:
    return (
        torch.stack([item["frames"] for item in batch]),
        [item["target"] for item in batch],
        [item["clip_id"] for item in batch],
    )
