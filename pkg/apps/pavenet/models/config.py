"""Model hyperparameters and the ablation variants built from them."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, root_validator


class AttentionConfig(BaseModel):
    """Shared attention settings: width D, heads h, levels L and points K."""

    embed_dims: int = Field(64, gt=0)
    num_heads: int = Field(4, gt=0)
    num_levels: int = Field(2, gt=0)
    num_points: int = Field(4, gt=0)
    feedforward_channels: int = Field(256, gt=0)

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def check_heads(cls, values):
        if values["embed_dims"] % values["num_heads"]:
            raise ValueError(
                f"embed_dims should be divisible by num_heads, but got {values['embed_dims']} and {values['num_heads']}"
            )
        return values

    @property
    def head_dims(self) -> int:
        return self.embed_dims // self.num_heads


class EncoderConfig(BaseModel):
    layers: int = Field(2, ge=0)
    mode: Literal["spatial", "spatiotemporal"] = "spatial"
    attention: Literal["dense", "deformable"] = "deformable"
    attn: AttentionConfig = AttentionConfig()

    class Config:
        extra = "forbid"


DecoderKind = Literal["pose-aware", "baseline", "none"]
ReferenceKind = Literal["top-m", "learned"]


class ModelConfig(BaseModel):
    """Architecture of one model instance.

    Defaults are the desk-scale settings: 64x96 frames, D=64, M=20 pose
    queries, J=15 joints, T=1, two encoder layers and three layers in each
    decoder.
    """

    image_size: tuple[int, int] = (64, 96)
    strides: tuple[int, ...] = (4, 8)
    embed_dims: int = Field(64, gt=0)
    num_heads: int = Field(4, gt=0)
    num_points: int = Field(4, gt=0)
    feedforward_channels: int = Field(256, gt=0)
    num_queries: int = Field(20, gt=0)
    num_joints: int = Field(15, gt=0)
    span: int = Field(1, ge=0, le=2)
    encoder_layers: int = Field(2, ge=0)
    encoder_mode: Literal["spatial", "spatiotemporal"] = "spatial"
    encoder_attention: Literal["dense", "deformable"] = "deformable"
    decoder: DecoderKind = "pose-aware"
    reference: ReferenceKind = "top-m"
    decoder_layers: int = Field(3, gt=0)
    joint_decoder_layers: int = Field(3, gt=0)
    use_stjd: bool = True

    class Config:
        extra = "forbid"

    @property
    def num_frames(self) -> int:
        return 2 * self.span + 1

    @property
    def num_levels(self) -> int:
        return len(self.strides)

    @property
    def num_tokens(self) -> int:
        height, width = self.image_size
        return sum((height // s) * (width // s) for s in self.strides)

    def attention_config(self) -> AttentionConfig:
        return AttentionConfig(
            embed_dims=self.embed_dims,
            num_heads=self.num_heads,
            num_levels=self.num_levels,
            num_points=self.num_points,
            feedforward_channels=self.feedforward_channels,
        )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            layers=self.encoder_layers,
            mode=self.encoder_mode,
            attention=self.encoder_attention,
            attn=self.attention_config(),
        )


VARIANTS: dict[str, dict] = {
    "pave": {},
    "baseline-ste": dict(
        encoder_mode="spatiotemporal", decoder="baseline", reference="learned"
    ),
    "pave-ste": dict(encoder_mode="spatiotemporal"),
    "no-stjd": dict(use_stjd=False),
    "no-decoders": dict(decoder="none", use_stjd=False),
    "random-refs": dict(reference="learned"),
    "image-only": dict(span=0),
}


def apply_variant(config: ModelConfig, variant: str) -> ModelConfig:
    """Returns a copy of ``config`` with the overrides of ``variant``.

    Raises:
        ValueError: if the variant is unknown.
    """
    if variant not in VARIANTS:
        raise ValueError(
            f"variant should be one of {sorted(VARIANTS)}, but got {variant!r}"
        )

    return config.copy(update=VARIANTS[variant])
