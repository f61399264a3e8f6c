"""The 15-joint PoseTrack skeleton."""
from __future__ import annotations


JOINT_NAMES = (
    "nose",
    "head_bottom",
    "head_top",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)
NUM_JOINTS = len(JOINT_NAMES)

LIMBS = (
    (2, 0),
    (0, 1),
    (1, 3),
    (1, 4),
    (3, 5),
    (5, 7),
    (4, 6),
    (6, 8),
    (3, 9),
    (4, 10),
    (9, 10),
    (9, 11),
    (11, 13),
    (10, 12),
    (12, 14),
)

FLIP_PAIRS = ((3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14))

JOINT_GROUPS = {
    "Head": (0, 1, 2),
    "Shoulder": (3, 4),
    "Elbow": (5, 6),
    "Wrist": (7, 8),
    "Hip": (9, 10),
    "Knee": (11, 12),
    "Ankle": (13, 14),
}


def flip_permutation() -> list[int]:
    """Joint order after a horizontal flip: left and right swapped."""
    order = list(range(NUM_JOINTS))
    for left, right in FLIP_PAIRS:
        order[left], order[right] = right, left

    return order
