"""PoseTrack/COCO-style keypoint files.

Layout::

    {"images": [{"id": 1, "file_name": "..."}],
     "annotations": [{"image_id": 1, "keypoints": [x, y, v, ...],
                      "score": 0.9, "bbox": [x, y, w, h]}],
     "categories": [{"name": "person", "keypoints": ["nose", ...]}]}

Unknown fields are ignored. ``v = 0`` marks an invisible joint.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from apps.pavenet.core.errors import AnnotationParseError, AnnotationSchemaError
from apps.pavenet.data.skeleton import LIMBS
from apps.pavenet.evaluation.structures import (
    AnnotationSet,
    ImageAnnotations,
    PoseSet,
)


logger = logging.getLogger(name=__name__)


class ImageEntry(BaseModel):
    id: int
    file_name: str


class AnnotationEntry(BaseModel):
    image_id: int
    keypoints: list[float]
    score: Optional[float] = None
    bbox: Optional[list[float]] = None


class CategoryEntry(BaseModel):
    name: str = "person"
    keypoints: list[str]


class PoseTrackFile(BaseModel):
    images: list[ImageEntry]
    annotations: list[AnnotationEntry]
    categories: list[CategoryEntry]


def _schema_error(error: ValidationError) -> AnnotationSchemaError:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"])

    return AnnotationSchemaError(f"invalid annotation file at {key}: {first['msg']}", key)


def parse_posetrack_json(path: str | Path) -> AnnotationSet:
    """Reads a PoseTrack-style annotation or prediction file.

    Args:
        path (str | Path): JSON file.

    Returns:
        AnnotationSet: per-image poses in file order.

    Raises:
        AnnotationParseError: if the file is not valid JSON; carries the byte
            offset of the problem.
        AnnotationSchemaError: if a required key is missing, image ids repeat
            or a keypoint array does not hold 3 values per keypoint.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise AnnotationParseError(f"annotation file {path} is not UTF-8", e.start) from e

    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise AnnotationParseError(f"malformed annotation file {path}: {e.msg}", offset) from e

    try:
        parsed = PoseTrackFile.parse_obj(document)
    except ValidationError as e:
        raise _schema_error(e) from e

    if not parsed.categories:
        raise AnnotationSchemaError("annotation file has no category", "categories")
    names = tuple(parsed.categories[0].keypoints)
    num_joints = len(names)

    ids = [image.id for image in parsed.images]
    if len(set(ids)) != len(ids):
        raise AnnotationSchemaError("image ids should be unique", "images.id")

    per_image: dict[int, list[AnnotationEntry]] = {i: [] for i in ids}
    for i, annotation in enumerate(parsed.annotations):
        if len(annotation.keypoints) != 3 * num_joints:
            raise AnnotationSchemaError(
                f"keypoints should hold {3 * num_joints} values, but annotation {i} has {len(annotation.keypoints)}",
                f"annotations.{i}.keypoints",
            )
        if annotation.image_id not in per_image:
            raise AnnotationSchemaError(
                f"annotation {i} refers to unknown image {annotation.image_id}",
                f"annotations.{i}.image_id",
            )
        per_image[annotation.image_id].append(annotation)

    images = []
    for image in parsed.images:
        annotations = per_image[image.id]
        if annotations:
            triplets = np.array([a.keypoints for a in annotations]).reshape(
                len(annotations), num_joints, 3
            )
            scores = [1.0 if a.score is None else a.score for a in annotations]
            heights = None
            if all(a.bbox is not None for a in annotations):
                heights = np.array([a.bbox[3] for a in annotations], dtype=np.float64)
            poses = PoseSet(
                poses=triplets[..., :2],
                visible=triplets[..., 2] > 0,
                scores=np.array(scores, dtype=np.float64),
                heights=heights,
            )
        else:
            poses = PoseSet.empty(num_joints)
        images.append(ImageAnnotations(image.id, image.file_name, poses))

    logger.debug(f"parsed {len(images)} images from {path}")

    return AnnotationSet(images=images, keypoint_names=names)


def write_posetrack_json(annotations: AnnotationSet, path: str | Path) -> None:
    """Writes ``annotations`` in the layout :func:`parse_posetrack_json`
    reads; visible joints get ``v = 2``, hidden ones ``v = 0``."""
    images, entries = [], []
    for image in annotations.images:
        images.append(dict(id=image.image_id, file_name=image.file_name))
        poses = image.poses
        heights = poses.heights
        for i in range(len(poses)):
            keypoints = []
            for (x, y), visible in zip(poses.poses[i].tolist(), poses.visible[i].tolist()):
                keypoints.extend([x, y, 2 if visible else 0])
            entry = dict(
                image_id=image.image_id,
                category_id=1,
                keypoints=keypoints,
                score=float(poses.scores[i]),
            )
            if heights is not None:
                xs, ys = poses.poses[i, :, 0], poses.poses[i, :, 1]
                entry["bbox"] = [
                    float(xs.min()),
                    float(ys.min()),
                    float(xs.max() - xs.min()),
                    float(heights[i]),
                ]
            entries.append(entry)

    document = dict(
        images=images,
        annotations=entries,
        categories=[
            dict(
                id=1,
                name="person",
                keypoints=list(annotations.keypoint_names),
                skeleton=[[a + 1, b + 1] for a, b in LIMBS],
            )
        ],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document), encoding="utf-8")

    logger.info(f"wrote {len(entries)} poses for {len(images)} images to {path}")


def write_predictions(predictions: AnnotationSet, path: str | Path) -> None:
    write_posetrack_json(predictions, path)
