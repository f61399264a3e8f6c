import numpy as np
import pytest

from apps.pavenet.data.skeleton import JOINT_NAMES
from apps.pavenet.data.synth import generate_clip
from apps.pavenet.evaluation import (
    AnnotationSet,
    ImageAnnotations,
    PoseSet,
    compute_ap,
    compute_map,
    evaluate,
    group_ap,
    match_poses_to_gt,
    precision_recall_curve,
)
from apps.pavenet.lib.evaluator import clip_ground_truth, oracle_predictions


def two_person_gt() -> PoseSet:
    return PoseSet(
        poses=np.array([[[0.0, 0.0], [0.0, 10.0]], [[50.0, 0.0], [50.0, 10.0]]]),
        visible=np.ones((2, 2), dtype=bool),
        heights=np.array([10.0, 10.0]),
    )


def synthetic_gt(num_clips: int = 4) -> AnnotationSet:
    images = [clip_ground_truth(generate_clip(seed, 4, "easy"), image_id=seed) for seed in range(num_clips)]
    return AnnotationSet(images=images)


def test_ap_of_a_short_ranking():
    assert compute_ap([(0.9, True), (0.8, False), (0.7, True)], 2) == pytest.approx(5 / 6)


def test_ap_uses_interpolated_precision():
    # the late hit lifts the precision of the earlier recall level
    detections = [(0.9, True), (0.8, False), (0.7, False), (0.6, True), (0.5, True)]
    assert compute_ap(detections, 3) == pytest.approx(1 / 3 + 2 / 3 * 0.6)


def test_ap_edge_cases():
    assert compute_ap([], 0) == 1.0
    assert compute_ap([(0.5, False)], 0) == 0.0
    assert compute_ap([], 3) == 0.0
    assert compute_ap([(0.5, True)], 1) == 1.0
    with pytest.raises(ValueError):
        compute_ap([], -1)


def test_precision_recall_follow_confidence():
    precision, recall = precision_recall_curve([(0.1, True), (0.9, False)], 1)

    assert precision.tolist() == [0.0, 0.5]
    assert recall.tolist() == [0.0, 1.0]


def test_map_and_groups():
    keypoint_ap = {name: 1.0 if i < 3 else 0.0 for i, name in enumerate(JOINT_NAMES)}
    row = group_ap(keypoint_ap, JOINT_NAMES)

    assert row["Head"] == 1.0
    assert row["Shoulder"] == 0.0
    assert row["Mean"] == pytest.approx(3 / 15)
    assert compute_map([]) == 0.0


def test_greedy_matching_by_confidence():
    gts = two_person_gt()
    preds = PoseSet(
        poses=np.array(
            [
                [[50.0, 0.5], [50.0, 10.0]],
                [[50.5, 0.0], [50.0, 9.5]],
                [[0.5, 0.0], [30.0, 30.0]],
                [[200.0, 0.0], [200.0, 10.0]],
            ]
        ),
        visible=np.ones((4, 2), dtype=bool),
        scores=np.array([0.5, 0.9, 0.7, 0.8]),
    )
    result = match_poses_to_gt(preds, gts)

    assert result.pairs == [(1, 1), (2, 0)]
    assert sorted(result.unmatched) == [0, 3]
    assert result.missed == []


def test_matching_ignores_hidden_joints():
    gts = two_person_gt()
    gts.visible[1] = [False, True]
    preds = PoseSet(poses=np.array([[[50.0, 0.0], [90.0, 90.0]]]), visible=np.ones((1, 2)))

    result = match_poses_to_gt(preds, gts)
    assert result.pairs == []
    assert result.missed == [0, 1]


def test_matching_radius_must_be_positive():
    with pytest.raises(ValueError):
        match_poses_to_gt(PoseSet.empty(2), two_person_gt(), radius_fraction=0.0)


def test_oracle_scores_perfectly():
    gt = synthetic_gt()
    report = evaluate(gt, oracle_predictions(gt))

    assert report.mean_ap == pytest.approx(1.0)
    assert all(ap == pytest.approx(1.0) for ap in report.keypoint_ap.values())
    assert report.group_ap["Mean"] == pytest.approx(1.0)
    assert report.false_positives == 0
    assert list(report.keypoint_ap) == list(JOINT_NAMES)


def test_far_predictions_score_zero():
    gt = synthetic_gt()
    far = oracle_predictions(gt)
    for image in far.images:
        image.poses.poses += 1000.0

    report = evaluate(gt, far)
    assert report.mean_ap == 0.0
    assert report.matched == 0


def test_missing_images_count_as_empty():
    gt = synthetic_gt(2)
    partial = oracle_predictions(gt)
    partial.images = partial.images[:1]

    report = evaluate(gt, partial)
    assert 0.0 < report.mean_ap < 1.0
    assert report.missed == len(gt.images[1].poses)


def two_joint_sets(gts: PoseSet, preds: PoseSet) -> tuple[AnnotationSet, AnnotationSet]:
    names = ("top", "bottom")
    return (
        AnnotationSet([ImageAnnotations(0, "a.png", gts)], keypoint_names=names),
        AnnotationSet([ImageAnnotations(0, "a.png", preds)], keypoint_names=names),
    )


def test_joints_matched_to_hidden_ground_truth_are_wrong():
    gts = two_person_gt()
    gts.visible[1, 1] = False
    preds = PoseSet(
        poses=gts.poses.copy(),
        visible=np.ones((2, 2), dtype=bool),
        scores=np.array([0.8, 0.9]),
    )

    report = evaluate(*two_joint_sets(gts, preds))
    # bottom: (0.9, wrong) ranks above (0.8, correct) with one visible gt
    assert report.keypoint_ap["top"] == 1.0
    assert report.keypoint_ap["bottom"] == pytest.approx(0.5, abs=1e-12)


def test_unreported_joints_are_not_detections():
    gts = two_person_gt()
    gts.visible[1, 1] = False
    preds = PoseSet(poses=gts.poses.copy(), visible=gts.visible.copy(), scores=np.array([0.8, 0.9]))

    report = evaluate(*two_joint_sets(gts, preds))
    assert report.keypoint_ap == {"top": 1.0, "bottom": 1.0}


def noisy_predictions(gt: AnnotationSet, rng: np.random.Generator, noise: float = 6.0) -> AnnotationSet:
    pred = oracle_predictions(gt)
    for image in pred.images:
        image.poses.poses = image.poses.poses + rng.normal(scale=noise, size=image.poses.poses.shape)
        image.poses.scores = rng.random(len(image.poses))

    return pred


def permuted(annotations: AnnotationSet, order: np.ndarray) -> AnnotationSet:
    images = [
        ImageAnnotations(
            image.image_id,
            image.file_name,
            PoseSet(
                poses=image.poses.poses[:, order],
                visible=image.poses.visible[:, order],
                scores=image.poses.scores,
                heights=image.poses.figure_heights(),
            ),
        )
        for image in annotations.images
    ]

    return AnnotationSet(images, keypoint_names=tuple(annotations.keypoint_names[j] for j in order))


@pytest.mark.parametrize("seed", range(20))
def test_ap_grows_with_a_confident_hit(seed):
    rng = np.random.default_rng(seed)
    total_gt = int(rng.integers(1, 12))
    hits = rng.random(int(rng.integers(0, 20))) < 0.5
    hits[np.cumsum(hits) > total_gt] = False
    detections = [(float(score), bool(hit)) for score, hit in zip(rng.random(len(hits)), hits)]

    before = compute_ap(detections, total_gt)
    after = compute_ap(detections + [(2.0, True)], total_gt + 1)

    assert 0.0 <= before <= after <= 1.0


def test_map_ignores_keypoint_order(rng):
    gt = synthetic_gt()
    pred = noisy_predictions(gt, rng)
    order = rng.permutation(len(JOINT_NAMES))

    report = evaluate(gt, pred)
    shuffled = evaluate(permuted(gt, order), permuted(pred, order))

    assert 0.0 < report.mean_ap < 1.0
    assert shuffled.keypoint_ap == pytest.approx(report.keypoint_ap, abs=1e-12)
    assert shuffled.mean_ap == pytest.approx(report.mean_ap, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_random_reports_stay_in_range(seed):
    rng = np.random.default_rng(seed)
    images = []
    for image_id in range(3):
        num_gt, num_pred = rng.integers(0, 4, size=2)
        gts = PoseSet(
            poses=rng.random((num_gt, len(JOINT_NAMES), 2)) * 100,
            visible=rng.random((num_gt, len(JOINT_NAMES))) < 0.7,
            heights=np.full(num_gt, 40.0),
        )
        preds = PoseSet(
            poses=rng.random((num_pred, len(JOINT_NAMES), 2)) * 100,
            visible=rng.random((num_pred, len(JOINT_NAMES))) < 0.9,
            scores=rng.random(num_pred),
        )
        name = f"{image_id}.png"
        images.append((ImageAnnotations(image_id, name, gts), ImageAnnotations(image_id, name, preds)))

    report = evaluate(AnnotationSet([g for g, _ in images]), AnnotationSet([p for _, p in images]))

    values = [*report.keypoint_ap.values(), *report.group_ap.values(), report.mean_ap]
    assert all(0.0 <= value <= 1.0 for value in values)
