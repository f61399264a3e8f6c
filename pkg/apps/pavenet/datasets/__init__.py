from apps.pavenet.datasets.manifest import (
    ClipRecord,
    build_records,
    read_manifest,
    write_manifest,
)
from apps.pavenet.datasets.synthetic import SyntheticPoseDataset, collate_clips


__all__ = [
    "ClipRecord",
    "build_records",
    "read_manifest",
    "write_manifest",
    "SyntheticPoseDataset",
    "collate_clips",
]
