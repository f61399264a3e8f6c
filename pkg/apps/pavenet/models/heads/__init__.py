from apps.pavenet.models.heads.initial_pose_head import InitialPoseHead, select_top_m
from apps.pavenet.models.heads.pose_heads import PoseHeads
