from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from tqdm.auto import tqdm

from apps.pavenet.app.schemas.run_config import EvalConfig, RunConfig
from apps.pavenet.data.synth import ClipSample
from apps.pavenet.datasets.manifest import build_records
from apps.pavenet.datasets.synthetic import SyntheticPoseDataset
from apps.pavenet.evaluation.metrics import evaluate
from apps.pavenet.evaluation.overlays import draw_overlay, write_overlay
from apps.pavenet.evaluation.posetrack import write_posetrack_json, write_predictions
from apps.pavenet.evaluation.report import EvalReport, write_report
from apps.pavenet.evaluation.structures import AnnotationSet, ImageAnnotations, PoseSet
from apps.pavenet.models.e2e import PaveNet, PoseRunner


logger = logging.getLogger(name=__name__)


def clip_ground_truth(clip: ClipSample, image_id: int, file_name: str = "") -> ImageAnnotations:
    """Keyframe ground truth in pixels, scaled by the true figure heights."""
    key = clip.keyframe
    return ImageAnnotations(
        image_id=image_id,
        file_name=file_name or f"{image_id:06d}.png",
        poses=PoseSet(
            poses=clip.pixel_joints()[key],
            visible=clip.visible[key],
            heights=np.array([figure.height for figure in clip.figures]),
        ),
    )


def to_pixels(poses: torch.Tensor, image_size: tuple[int, int]) -> np.ndarray:
    height, width = image_size
    scale = np.array([width - 1, height - 1], dtype=np.float64)

    return poses.detach().cpu().numpy().astype(np.float64) * scale


def oracle_predictions(gt: AnnotationSet) -> AnnotationSet:
    """Ground truth restated as predictions with confidence 1; hidden joints
    stay unreported and persons without any visible joint are left out."""
    images = []
    for image in gt.images:
        keep = image.poses.visible.any(-1)
        images.append(
            ImageAnnotations(
                image.image_id,
                image.file_name,
                PoseSet(
                    poses=image.poses.poses[keep],
                    visible=image.poses.visible[keep],
                ),
            )
        )

    return AnnotationSet(images=images, keypoint_names=gt.keypoint_names)


def validation_dataset(config: RunConfig, split: str = "val") -> SyntheticPoseDataset:
    """The held-out clips of ``split``, sized by ``data.val_clips``."""
    data = config.data
    records = build_records(
        split,
        data.val_clips,
        seed=config.seed,
        difficulty=data.difficulty,
        span=config.resolved().span,
        persons=data.persons,
        corruption=data.corruption,
        severity=data.severity,
        image_size=config.model.image_size,
    )

    return SyntheticPoseDataset(records)


class Evaluator:
    """Runs a model over a synthetic split and scores its keyframe poses.

    Args:
        model (PaveNet): model to evaluate.
        cfg (EvalConfig): threshold, radius and overlay settings.
        batch_size (int, optional): clips per forward. Defaults to 8.
    """

    def __init__(self, model: PaveNet, cfg: EvalConfig, batch_size: int = 8) -> None:
        self.runner = PoseRunner(model, threshold=cfg.threshold)
        self.cfg = cfg
        self.batch_size = batch_size

    def predict(
        self, dataset: SyntheticPoseDataset, progress: bool = False
    ) -> tuple[AnnotationSet, AnnotationSet, list[np.ndarray]]:
        """Ground truth, predictions and keyframes of every clip."""
        gt, pred, keyframes = AnnotationSet(), AnnotationSet(), []

        starts = range(0, len(dataset), self.batch_size)
        for start in tqdm(starts, desc="eval", disable=not progress):
            indices = range(start, min(start + self.batch_size, len(dataset)))
            clips = [dataset.clip(i) for i in indices]
            frames = torch.stack([clip.frames_tensor() for clip in clips])

            for i, clip, (poses, scores) in zip(indices, clips, self.runner.predict_batch(frames)):
                truth = clip_ground_truth(clip, image_id=i)
                gt.images.append(truth)
                pred.images.append(
                    ImageAnnotations(
                        i,
                        truth.file_name,
                        PoseSet(
                            poses=to_pixels(poses, clip.image_size),
                            visible=np.ones(poses.shape[:2], dtype=bool),
                            scores=scores.cpu().numpy(),
                        ),
                    )
                )
                keyframes.append(clip.frames[clip.keyframe])

        return gt, pred, keyframes

    def run(
        self,
        dataset: SyntheticPoseDataset,
        out_dir: str | Path | None = None,
        progress: bool = False,
    ) -> EvalReport:
        """Scores ``dataset``; with ``out_dir`` also writes ``report.csv``,
        ``report.json``, the ground-truth and prediction files and optional
        overlays."""
        gt, pred, keyframes = self.predict(dataset, progress=progress)
        report = evaluate(gt, pred, radius_fraction=self.cfg.radius_fraction)

        if out_dir is not None:
            out_dir = Path(out_dir)
            write_report(report, out_dir / "report.csv")
            write_posetrack_json(gt, out_dir / "annotations.json")
            write_predictions(pred, out_dir / "predictions.json")
            if self.cfg.overlays:
                for truth, guess, image in list(zip(gt.images, pred.images, keyframes))[
                    : self.cfg.max_overlays
                ]:
                    overlay = draw_overlay(image, truth.poses, guess.poses, self.cfg.threshold)
                    write_overlay(out_dir / "overlays" / f"{truth.image_id:06d}.png", overlay)

        return report
