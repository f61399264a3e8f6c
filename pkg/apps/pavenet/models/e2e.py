from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
from torch import Tensor

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.models.backbones.tiny_convnet import TinyConvBackbone
from apps.pavenet.models.backbones.tokenizer import PatchEmbed, TokenLayout
from apps.pavenet.models.base_module import BaseModule
from apps.pavenet.models.common.embeddings import TokenEmbedding
from apps.pavenet.models.config import ModelConfig, apply_variant
from apps.pavenet.models.decoders.joint_decoder import SpatiotemporalJointDecoder
from apps.pavenet.models.decoders.pose_decoder import (
    ReferencePoseSet,
    SpatiotemporalPoseDecoder,
)
from apps.pavenet.models.encoders.encoder import SpatialEncoder, SpatiotemporalEncoder
from apps.pavenet.models.heads.initial_pose_head import InitialPoseHead
from apps.pavenet.models.structures import PosePrediction


logger = logging.getLogger(name=__name__)


@dataclass
class PaveNetOutput:
    """Everything a forward pass produces.

    ``stages`` lists every supervised prediction in order: initial candidates
    (when the model selects top-M references), each pose-decoder layer, then
    the joint decoder. ``final`` is the M-pose prediction of the keyframe.
    """

    stages: list[PosePrediction]
    final: PosePrediction
    references: ReferencePoseSet | None = None
    candidates: PosePrediction | None = None


class PaveNet(BaseModule):
    """End-to-end multi-person pose estimation on a window of frames.

    | ((B, f, 3, H, W))--
    |    --[backbone + 1x1 tokens + embeddings, frame by frame]--
    |    --[spatial encoder per frame | spatiotemporal encoder over window]--
    |    --[initial token-wise poses -> top-M references]--
    |    --[pose decoder: pose-aware attention over all frames]--
    |    --[joint decoder: shared joint queries]--
    | -->(M poses + confidences of the centre frame)

    The ablation variants switch parts of this pipeline through
    :class:`ModelConfig` (see :data:`apps.pavenet.models.config.VARIANTS`).
    """

    def __init__(self, *, cfg: ModelConfig, init: bool = True) -> None:
        """
        Args:
            cfg (ModelConfig): architecture.
            init (bool, optional): initialise weights right away.
                Defaults to True.
        """
        super().__init__()

        self.cfg = cfg
        attn = cfg.attention_config()
        decoder_frames = cfg.num_frames if cfg.decoder == "pose-aware" else 1

        self.backbone = TinyConvBackbone(
            in_channels=3, embed_dims=cfg.embed_dims, strides=cfg.strides
        )
        self.patch_embed = PatchEmbed(
            in_channels=cfg.embed_dims,
            embed_dims=cfg.embed_dims,
            num_levels=cfg.num_levels,
        )
        self.embedding = TokenEmbedding(
            num_tokens=cfg.num_tokens,
            num_levels=cfg.num_levels,
            embed_dims=cfg.embed_dims,
        )

        if cfg.encoder_mode == "spatial":
            self.encoder = SpatialEncoder(cfg.encoder_config())
        else:
            self.encoder = SpatiotemporalEncoder(
                cfg.encoder_config(), num_frames=cfg.num_frames
            )

        self.initial_head = None
        if cfg.decoder == "none" or (
            cfg.decoder == "pose-aware" and cfg.reference == "top-m"
        ):
            self.initial_head = InitialPoseHead(cfg.embed_dims, cfg.num_joints)

        self.pose_decoder = None
        if cfg.decoder != "none":
            self.pose_decoder = SpatiotemporalPoseDecoder(
                attn,
                num_frames=decoder_frames,
                num_queries=cfg.num_queries,
                num_joints=cfg.num_joints,
                num_layers=cfg.decoder_layers,
                reference=cfg.reference,
            )

        self.joint_decoder = None
        if cfg.use_stjd and cfg.decoder != "none":
            self.joint_decoder = SpatiotemporalJointDecoder(
                attn,
                num_frames=decoder_frames,
                num_joints=cfg.num_joints,
                num_layers=cfg.joint_decoder_layers,
            )

        if init:
            self.init_weights()

    @property
    def num_stages(self) -> int:
        stages = 0 if self.initial_head is None else 1
        if self.pose_decoder is not None:
            stages += len(self.pose_decoder.layers)
        if self.joint_decoder is not None:
            stages += 1

        return stages

    def tokenize_frames(self, frames: Tensor) -> tuple[Tensor, TokenLayout]:
        """Embedded tokens of every frame, shape (B, f, N, D); frames are
        processed one at a time, so each frame's tokens depend on that frame
        only."""
        tokens, layout = [], None
        for f in range(frames.shape[1]):
            token_set = self.patch_embed(self.backbone(frames[:, f]))
            layout = token_set.layout
            tokens.append(self.embedding(token_set.tokens, layout.levels))

        return torch.stack(tokens, dim=1), layout

    def encode(self, frames: Tensor) -> tuple[Tensor, TokenLayout]:
        """Encoded tokens the decoders read, shape (B, f', N, D).

        ``f'`` is the window for the spatial encoder and for the
        spatiotemporal encoder inside PAVE-Net, and 1 (the updated keyframe)
        for the baseline.
        """
        if frames.dim() != 5 or frames.shape[1] != self.cfg.num_frames:
            raise DimensionError(
                f"frames should have shape (B, {self.cfg.num_frames}, 3, H, W), but got {tuple(frames.shape)}"
            )
        tokens, layout = self.tokenize_frames(frames)

        if isinstance(self.encoder, SpatialEncoder):
            return self.encoder.encode_frames(tokens, layout), layout

        encoded = self.encoder(tokens, layout)
        if self.cfg.decoder == "baseline":
            key = self.cfg.num_frames // 2
            return encoded[:, key : key + 1], layout

        return encoded, layout

    def forward(self, frames: Tensor) -> PaveNetOutput:
        """Predicts the poses of the centre frame.

        Args:
            frames (Tensor): window of shape (B, 2T+1, 3, H, W), values in
                [0, 1].

        Returns:
            PaveNetOutput: supervised stages and the final prediction.
        """
        value, layout = self.encode(frames)
        keyframe = value[:, value.shape[1] // 2]

        stages: list[PosePrediction] = []
        candidates = None
        reference = None
        if self.initial_head is not None:
            candidates = self.initial_head(keyframe, layout.centers)
            stages.append(candidates)
            selected = self.initial_head.select(candidates, self.cfg.num_queries)
            reference = selected.poses

        if self.pose_decoder is None:
            return PaveNetOutput(stages=stages, final=selected, candidates=candidates)

        _, references, decoded = self.pose_decoder(value, layout, reference)
        stages.extend(decoded)
        final = decoded[-1]

        if self.joint_decoder is not None:
            joints, scales, _ = self.joint_decoder(value, layout, final.poses)
            final = PosePrediction(poses=joints, logits=final.logits, scales=scales)
            stages.append(final)

        return PaveNetOutput(
            stages=stages, final=final, references=references, candidates=candidates
        )


def build_model(cfg: ModelConfig, variant: str | None = None) -> PaveNet:
    """Builds a float64 model for ``cfg`` with the overrides of ``variant``."""
    if variant is not None:
        cfg = apply_variant(cfg, variant)

    model = PaveNet(cfg=cfg).to(torch.float64)
    logger.info(
        f"built {variant or 'model'} with {sum(p.numel() for p in model.parameters())} parameters"
        f" and {model.num_stages} supervised stages"
    )

    return model


class PoseRunner:
    """Inference wrapper around :class:`PaveNet`.

    Args:
        model (PaveNet): trained model.
        threshold (float, optional): minimum confidence of a reported pose.
            Defaults to 0.3.
    """

    def __init__(self, model: PaveNet, threshold: float = 0.3) -> None:
        self.model = model
        self.threshold = threshold

    @torch.no_grad()
    def predict_batch(self, frames: Tensor) -> list[tuple[Tensor, Tensor]]:
        """Predicts the poses of the centre frame of every window.

        Args:
            frames (Tensor): windows of shape (B, f, 3, H, W).

        Returns:
            list[tuple[Tensor, Tensor]]: per window, the normalised poses
            (P, J, 2) and confidences (P,) above the threshold, best first.
        """
        self.model.eval()
        final = self.model(frames.to(torch.float64)).final
        scores = final.scores

        results = []
        for poses, confidence in zip(final.poses, scores):
            order = torch.argsort(confidence, descending=True, stable=True)
            keep = order[confidence[order] > self.threshold]
            results.append((poses[keep], confidence[keep]))

        return results
