import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from apps.pavenet.core.errors import AnnotationParseError, AnnotationSchemaError
from apps.pavenet.data.skeleton import JOINT_NAMES
from apps.pavenet.data.synth import generate_clip
from apps.pavenet.evaluation import (
    AnnotationSet,
    EvalReport,
    PoseSet,
    draw_overlay,
    evaluate,
    parse_posetrack_json,
    read_report,
    write_overlay,
    write_posetrack_json,
    write_report,
)
from apps.pavenet.evaluation.overlays import GT_COLOR, PRED_COLOR
from apps.pavenet.lib.evaluator import clip_ground_truth, oracle_predictions


@pytest.fixture(scope="module")
def annotations() -> AnnotationSet:
    return AnnotationSet(
        images=[clip_ground_truth(generate_clip(seed, 3, "hard"), image_id=seed + 1) for seed in range(3)]
    )


def write_json(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def minimal_document(**overrides):
    document = dict(
        images=[dict(id=1, file_name="a.png")],
        annotations=[dict(image_id=1, keypoints=[1.0, 2.0, 2, 3.0, 4.0, 0])],
        categories=[dict(name="person", keypoints=["head", "neck"])],
    )
    document.update(overrides)

    return document


def test_posetrack_round_trip(annotations, tmp_path):
    path = tmp_path / "gt.json"
    write_posetrack_json(annotations, path)
    parsed = parse_posetrack_json(path)

    assert parsed.keypoint_names == JOINT_NAMES
    assert [image.image_id for image in parsed.images] == [1, 2, 3]
    for original, restored in zip(annotations.images, parsed.images):
        assert np.allclose(restored.poses.poses, original.poses.poses)
        assert np.array_equal(restored.poses.visible, original.poses.visible)
        assert np.allclose(restored.poses.figure_heights(), original.poses.figure_heights())


def test_parse_minimal_file(tmp_path):
    parsed = parse_posetrack_json(write_json(tmp_path / "a.json", minimal_document(extra=1)))
    poses = parsed.images[0].poses

    assert parsed.keypoint_names == ("head", "neck")
    assert poses.poses.tolist() == [[[1.0, 2.0], [3.0, 4.0]]]
    assert poses.visible.tolist() == [[True, False]]
    assert poses.scores.tolist() == [1.0]


def test_malformed_json_reports_offset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_bytes(b'{"images": [}')

    with pytest.raises(AnnotationParseError) as info:
        parse_posetrack_json(path)
    assert info.value.offset == 12


@pytest.mark.parametrize(
    "document, key",
    [
        ({k: v for k, v in minimal_document().items() if k != "images"}, "images"),
        (
            minimal_document(annotations=[dict(image_id=1, keypoints=[1.0, 2.0, 2])]),
            "annotations.0.keypoints",
        ),
        (
            minimal_document(images=[dict(id=1, file_name="a.png"), dict(id=1, file_name="b.png")]),
            "images.id",
        ),
        (
            minimal_document(annotations=[dict(image_id=9, keypoints=[0.0] * 6)]),
            "annotations.0.image_id",
        ),
    ],
)
def test_schema_errors_name_the_key(tmp_path, document, key):
    with pytest.raises(AnnotationSchemaError) as info:
        parse_posetrack_json(write_json(tmp_path / "a.json", document))
    assert info.value.key == key


def test_report_files(annotations, tmp_path):
    report = evaluate(annotations, oracle_predictions(annotations))
    write_report(report, tmp_path / "out" / "report.csv")

    frame = pd.read_csv(tmp_path / "out" / "report.csv")
    assert list(frame.columns) == ["keypoint", "ap"]
    assert len(frame) == len(JOINT_NAMES) + 1
    assert frame["keypoint"].iloc[-1] == "mAP"
    assert read_report(tmp_path / "out" / "report.csv") == report


def test_report_rejects_out_of_range_ap():
    with pytest.raises(ValidationError):
        EvalReport(keypoint_ap={"head": 1.5}, mean_ap=1.0)


def test_overlay(tmp_path):
    clip = generate_clip(2, 2, "easy")
    truth = clip_ground_truth(clip, image_id=0).poses
    pred = PoseSet(poses=truth.poses + 3.0, visible=truth.visible, scores=np.array([0.9, 0.1]))

    overlay = draw_overlay(clip.frames[clip.keyframe], truth, pred, threshold=0.3)
    assert overlay.shape == (256, 384, 3)
    assert (overlay == GT_COLOR).all(-1).any()
    assert (overlay == PRED_COLOR).all(-1).any()

    write_overlay(tmp_path / "overlays" / "000000.png", overlay)
    assert (tmp_path / "overlays" / "000000.png").stat().st_size > 0
