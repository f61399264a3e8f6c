from apps.pavenet.models.decoders.joint_decoder import (
    JointDecoderLayer,
    SpatiotemporalJointDecoder,
)
from apps.pavenet.models.decoders.pose_decoder import (
    FrameOffsetHead,
    PoseDecoderLayer,
    ReferencePoseSet,
    SpatiotemporalPoseDecoder,
)
