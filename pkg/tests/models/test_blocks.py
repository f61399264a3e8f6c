import pytest
import torch
import torch.nn.functional as F

from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import finite_difference_check
from apps.pavenet.models.backbones import PatchEmbed, TinyConvBackbone, TokenLayout
from apps.pavenet.models.common import (
    FFN,
    MLP,
    MultiHeadSelfAttention,
    MultiScaleDeformableAttention,
    TokenEmbedding,
    add_embeddings,
    bilinear_sample,
    multi_scale_deformable_attn,
)
from apps.pavenet.models.utils import constant_init
from tests.conftest import perturb_
from tests.models.loop_oracles import deformable_attention_loop, sample_loop, self_attention_loop


def test_self_attention_keeps_shape():
    attn = MultiHeadSelfAttention(embed_dims=8, num_heads=2)
    attn.init_weights()
    assert attn(torch.randn(2, 5, 8)).shape == (2, 5, 8)
    assert attn(torch.randn(5, 8)).shape == (5, 8)


def test_self_attention_is_permutation_equivariant():
    attn = MultiHeadSelfAttention(embed_dims=8, num_heads=2)
    attn.init_weights()
    x = torch.randn(1, 6, 8)
    perm = torch.randperm(6)

    assert torch.allclose(attn(x)[:, perm], attn(x[:, perm]), atol=1e-12)


def test_self_attention_heads_must_divide_width():
    with pytest.raises(DimensionError):
        MultiHeadSelfAttention(embed_dims=10, num_heads=3)


@pytest.mark.parametrize("seed", range(10))
def test_self_attention_gradient(seed):
    attn = perturb_(MultiHeadSelfAttention(embed_dims=8, num_heads=2), seed=seed)
    w = torch.randn(1, 4, 8)
    pos = torch.randn(1, 4, 8)

    error = finite_difference_check(
        lambda x: (attn(x, pos=pos) * w).sum(), torch.randn(1, 4, 8), floor=1e-6
    )
    assert error < 1e-4


def test_ffn_with_zero_output_layer_is_layer_norm():
    ffn = FFN(embed_dims=8, feedforward_channels=16)
    ffn.init_weights()
    constant_init(ffn.fc2, val=0.0, bias=0.0)
    x = torch.randn(3, 8)

    assert torch.allclose(ffn(x), F.layer_norm(x, (8,)), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_ffn_gradient(seed):
    ffn = perturb_(FFN(embed_dims=8, feedforward_channels=16), seed=seed)
    w = torch.randn(3, 8)

    assert finite_difference_check(lambda x: (ffn(x) * w).sum(), torch.randn(3, 8), floor=1e-6) < 1e-4


def test_mlp_zero_last_starts_at_zero():
    mlp = MLP(8, 16, 4, num_layers=3, zero_last=True)
    mlp.init_weights()
    assert torch.equal(mlp(torch.randn(5, 8)), torch.zeros(5, 4))


def test_init_weights_is_idempotent():
    mlp = MLP(8, 16, 4)
    mlp.init_weights()
    before = [p.clone() for p in mlp.parameters()]
    mlp.init_weights()

    assert mlp.is_init
    assert all(torch.equal(a, b) for a, b in zip(before, mlp.parameters()))


def test_bilinear_sample_midpoint():
    feature_map = torch.tensor([[[0.0], [2.0]]])
    assert torch.allclose(bilinear_sample(feature_map, torch.tensor([0.5, 0.0])), torch.tensor([1.0]))


def test_bilinear_sample_outside_reads_zero():
    feature_map = torch.ones(3, 4, 2)
    assert torch.equal(bilinear_sample(feature_map, torch.tensor([10.0, 10.0])), torch.zeros(2))


def test_deformable_core_reads_cell_at_its_centre():
    value = torch.arange(12.0).reshape(1, 1, 12, 1, 1)
    location = torch.tensor([2 / 3, 1 / 2]).reshape(1, 1, 1, 1, 1, 1, 2)
    weights = torch.ones(1, 1, 1, 1, 1, 1)

    out = multi_scale_deformable_attn(value, [(3, 4)], location, weights)
    assert torch.allclose(out, torch.tensor([[[6.0]]]))


def test_deformable_attention_slots_and_weights():
    attn = MultiScaleDeformableAttention(
        embed_dims=8, num_heads=2, num_levels=2, num_points=2, num_frames=3, num_refs=15
    )
    attn.init_weights()
    shapes = [(4, 6), (2, 3)]
    query = torch.randn(1, 5, 8)
    reference = torch.rand(1, 5, 3, 15, 2)
    value = torch.randn(1, 3, 30, 8)

    out, weights = attn(query, reference, value, shapes, return_weights=True)
    assert attn.num_slots == 3 * 2 * 15 * 2
    assert out.shape == (1, 5, 8)
    assert weights.shape == (1, 5, 2, attn.num_slots)
    assert torch.allclose(weights.sum(-1), torch.ones(1, 5, 2))


def test_deformable_attention_shape_checks():
    attn = MultiScaleDeformableAttention(embed_dims=8, num_heads=2, num_levels=2, num_frames=2)
    attn.init_weights()
    query = torch.randn(1, 3, 8)
    value = torch.randn(1, 2, 30, 8)

    with pytest.raises(DimensionError):
        attn(query, torch.rand(1, 3, 1, 1, 2), value, [(4, 6), (2, 3)])
    with pytest.raises(DimensionError):
        attn(query, torch.rand(1, 3, 2, 1, 2), value, [(4, 6)])
    with pytest.raises(DimensionError):
        attn(query, torch.rand(1, 3, 2, 1, 2), torch.randn(1, 2, 29, 8), [(4, 6), (2, 3)])


@pytest.mark.parametrize("seed", range(10))
def test_deformable_attention_gradient(seed):
    attn = perturb_(
        MultiScaleDeformableAttention(
            embed_dims=8, num_heads=2, num_levels=2, num_points=2, num_frames=2, num_refs=3
        ),
        seed=seed,
    )
    shapes = [(4, 6), (2, 3)]
    query = torch.randn(1, 2, 8)
    reference = 0.2 + 0.6 * torch.rand(1, 2, 2, 3, 2)
    value = torch.randn(1, 2, 30, 8)
    w = torch.randn(1, 2, 8)

    def of_value(v):
        return (attn(query, reference, v, shapes) * w).sum()

    def of_query(q):
        return (attn(q, reference, value, shapes) * w).sum()

    assert finite_difference_check(of_value, value, max_coords=20, seed=seed, floor=1e-6) < 1e-4
    assert finite_difference_check(of_query, query, floor=1e-6) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_deformable_core_matches_per_sample_loop(seed):
    torch.manual_seed(seed)
    # the second level is a single row
    shapes = [(3, 4), (1, 2)]
    value = torch.randn(2, 2, 14, 2, 3)
    locations = torch.rand(2, 3, 2, 2, 2, 4, 2) * 1.6 - 0.3
    weights = torch.softmax(torch.randn(2, 3, 2, 16), dim=-1).reshape(2, 3, 2, 2, 2, 4)

    out = multi_scale_deformable_attn(value, shapes, locations, weights)
    expected = sample_loop(value, shapes, locations, weights)

    assert torch.allclose(out, expected, rtol=0, atol=1e-10)


def test_deformable_core_single_cell_level_agrees_with_bilinear_sample():
    value = torch.tensor([[3.0, 5.0]]).reshape(1, 1, 2, 1, 1)
    # x within the row, y off the single row by a quarter cell
    location = torch.tensor([0.5, 0.25]).reshape(1, 1, 1, 1, 1, 1, 2)
    weights = torch.ones(1, 1, 1, 1, 1, 1)

    out = multi_scale_deformable_attn(value, [(1, 2)], location, weights)
    expected = bilinear_sample(value[0, 0, :, 0].reshape(1, 2, 1), torch.tensor([0.5, 0.25]))

    assert torch.allclose(out.reshape(1), expected, atol=1e-12)
    assert out.item() == pytest.approx(4.0 * 0.75)


@pytest.mark.parametrize("seed", range(3))
def test_deformable_attention_matches_per_sample_loop(seed):
    attn = perturb_(
        MultiScaleDeformableAttention(
            embed_dims=8, num_heads=2, num_levels=2, num_points=2, num_frames=2, num_refs=3
        ),
        seed=seed,
    )
    shapes = [(3, 4), (1, 2)]
    query = torch.randn(1, 3, 8)
    reference = torch.rand(1, 3, 2, 3, 2)
    value = torch.randn(1, 2, 14, 8)

    out = attn(query, reference, value, shapes)
    expected = deformable_attention_loop(attn, query, reference, value, shapes)

    assert torch.allclose(out, expected, rtol=0, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_self_attention_matches_per_head_loop(seed):
    attn = perturb_(MultiHeadSelfAttention(embed_dims=8, num_heads=2), seed=seed)
    x, pos = torch.randn(5, 8), torch.randn(5, 8)

    assert torch.allclose(attn(x, pos=pos), self_attention_loop(attn, x, pos), rtol=0, atol=1e-10)


def test_embeddings_need_level_metadata():
    with pytest.raises(DimensionError):
        add_embeddings(torch.randn(1, 4, 8), torch.zeros(4, 8), torch.zeros(2, 8), None)


def test_token_embedding_adds_level_embedding():
    embedding = TokenEmbedding(num_tokens=3, num_levels=2, embed_dims=4)
    with torch.no_grad():
        embedding.level_embed.copy_(torch.tensor([[0.0] * 4, [1.0] * 4]))
    tokens = torch.zeros(1, 3, 4)

    out = embedding(tokens, torch.tensor([0, 0, 1]))
    assert torch.equal(out[0, 2], torch.ones(4))
    assert torch.equal(out[0, 0], torch.zeros(4))


def test_backbone_pyramid_shapes():
    backbone = TinyConvBackbone(embed_dims=16)
    backbone.init_weights()
    pyramid = backbone(torch.rand(2, 3, 64, 96))

    assert pyramid.spatial_shapes == [(16, 24), (8, 12)]
    assert all(level.shape[1] == 16 for level in pyramid.levels)


def test_backbone_rejects_indivisible_size():
    backbone = TinyConvBackbone(embed_dims=16)
    with pytest.raises(DimensionError):
        backbone(torch.rand(1, 3, 60, 96))


def test_backbone_rejects_irregular_strides():
    with pytest.raises(ValueError):
        TinyConvBackbone(strides=(4, 16))


def test_backbone_keeps_constant_images_constant():
    backbone = TinyConvBackbone(embed_dims=8)
    backbone.init_weights()
    pyramid = backbone(torch.full((1, 3, 32, 48), 0.4))

    for level in pyramid.levels:
        corner = level[..., :1, :1]
        assert torch.allclose(level, corner.expand_as(level), atol=1e-12)


def test_tokens_and_layout():
    backbone = TinyConvBackbone(embed_dims=16)
    patch_embed = PatchEmbed(in_channels=16, embed_dims=16, num_levels=2)
    backbone.init_weights()
    patch_embed.init_weights()

    token_set = patch_embed(backbone(torch.rand(2, 3, 64, 96)))
    layout = token_set.layout

    assert token_set.tokens.shape == (2, 480, 16)
    assert layout.num_tokens == 480
    assert layout.level_start_index == (0, 384)
    assert layout.index_of(1, 2, 3) == 411
    assert layout.position_of(411) == (1, 2, 3)
    assert torch.equal(layout.centers[0], torch.tensor([0.0, 0.0]))
    assert torch.equal(layout.centers[383], torch.tensor([1.0, 1.0]))


def test_layout_rejects_cells_outside_level():
    layout = TokenLayout.from_shapes(((4, 6), (2, 3)))
    with pytest.raises(DimensionError):
        layout.index_of(1, 2, 0)


def test_tokenizer_is_deterministic():
    backbone = TinyConvBackbone(embed_dims=8)
    patch_embed = PatchEmbed(in_channels=8, embed_dims=8, num_levels=2)
    backbone.init_weights()
    patch_embed.init_weights()
    images = torch.rand(1, 3, 16, 32)

    first = patch_embed(backbone(images)).tokens
    assert torch.equal(first, patch_embed(backbone(images)).tokens)


def test_tokenizer_gradient():
    backbone = perturb_(TinyConvBackbone(embed_dims=8), std=0.05)
    patch_embed = perturb_(PatchEmbed(in_channels=8, embed_dims=8, num_levels=2), std=0.05)
    w = torch.randn(1, 40, 8)

    def fn(images):
        return (patch_embed(backbone(images)).tokens * w).sum()

    assert finite_difference_check(fn, torch.rand(1, 3, 16, 32), max_coords=12, floor=1e-6) < 1e-4
