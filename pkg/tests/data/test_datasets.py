import pytest
import torch
from pydantic import ValidationError

from apps.pavenet.datasets import (
    ClipRecord,
    SyntheticPoseDataset,
    build_records,
    collate_clips,
    read_manifest,
    write_manifest,
)


def test_records_are_deterministic():
    first = build_records("train", 5, seed=1)
    assert first == build_records("train", 5, seed=1)
    assert [r.clip_id for r in first] == [f"train-{i:05d}" for i in range(5)]


def test_splits_do_not_share_seeds():
    train = {r.seed for r in build_records("train", 20)}
    val = {r.seed for r in build_records("val", 20)}

    assert not train & val


def test_person_counts_respect_the_layout():
    records = build_records("train", 50, difficulty="easy", persons=(3, 12))
    assert all(3 <= r.n_persons <= 8 for r in records)


def test_severity_needs_a_corruption():
    records = build_records("test", 3, severity=0.7)
    assert all(r.severity == 0.0 for r in records)

    records = build_records("test", 3, corruption="blur", severity=0.7)
    assert all(r.corruption == "blur" and r.severity == 0.7 for r in records)


def test_manifest_round_trip(tmp_path):
    records = build_records("val", 4, span=2, corruption="occluder", severity=0.3)
    path = tmp_path / "nested" / "manifest.jsonl"
    write_manifest(records, path)

    assert read_manifest(path) == records


def test_record_validation():
    with pytest.raises(ValidationError):
        ClipRecord(clip_id="a", seed=0, n_persons=0)
    with pytest.raises(ValidationError):
        ClipRecord(clip_id="a", seed=0, n_persons=1, span=3)
    with pytest.raises(ValidationError):
        ClipRecord(clip_id="a", seed=0, n_persons=1, colour="red")


def test_dataset_items():
    dataset = SyntheticPoseDataset(build_records("train", 3, persons=(2, 2), image_size=(32, 48)))
    item = dataset[1]

    assert len(dataset) == 3
    assert item["frames"].shape == (3, 3, 32, 48)
    assert item["frames"].dtype == torch.float64
    assert 0.0 <= item["frames"].min() and item["frames"].max() <= 1.0
    assert item["target"].joints.shape == (2, 15, 2)
    assert item["clip_id"] == "train-00001"


def test_dataset_applies_corruption():
    clean = SyntheticPoseDataset(build_records("test", 1))
    blurred = SyntheticPoseDataset(build_records("test", 1, corruption="blur", severity=1.0))

    assert not torch.equal(clean[0]["frames"], blurred[0]["frames"])
    assert torch.equal(clean[0]["target"].joints, blurred[0]["target"].joints)


def test_augmentation_depends_on_step():
    dataset = SyntheticPoseDataset(build_records("train", 2), augment=True, seed=4)
    first = dataset[0]["frames"]
    assert torch.equal(first, dataset[0]["frames"])

    dataset.set_step(1)
    second = dataset[0]["frames"]
    dataset.set_step(0)
    assert torch.equal(first, dataset[0]["frames"])
    assert not torch.equal(first, second)


def test_collate():
    dataset = SyntheticPoseDataset(build_records("train", 2, span=0))
    frames, targets, clip_ids = collate_clips([dataset[0], dataset[1]])

    assert frames.shape == (2, 1, 3, 64, 96)
    assert len(targets) == 2
    assert clip_ids == ["train-00000", "train-00001"]
