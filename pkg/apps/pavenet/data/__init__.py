from apps.pavenet.data.corruption import corrupt_clip
from apps.pavenet.data.skeleton import (
    FLIP_PAIRS,
    JOINT_GROUPS,
    JOINT_NAMES,
    LIMBS,
    NUM_JOINTS,
)
from apps.pavenet.data.synth import (
    ClipSample,
    FigureSpec,
    generate_clip,
    layout_capacity,
    render_frame,
)
from apps.pavenet.data.transforms import augment_clip, hflip_clip, scale_clip


__all__ = [
    "corrupt_clip",
    "FLIP_PAIRS",
    "JOINT_GROUPS",
    "JOINT_NAMES",
    "LIMBS",
    "NUM_JOINTS",
    "ClipSample",
    "FigureSpec",
    "generate_clip",
    "layout_capacity",
    "render_frame",
    "augment_clip",
    "hflip_clip",
    "scale_clip",
]
