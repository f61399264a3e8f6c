import pytest
import torch
from torch.func import functional_call

from apps.pavenet.core.checkpoint import load_checkpoint, save_checkpoint
from apps.pavenet.core.errors import DimensionError
from apps.pavenet.core.tensor import finite_difference_check
from apps.pavenet.models import ModelConfig, PaveNet, PoseRunner, build_model
from apps.pavenet.models.losses import total_loss
from apps.pavenet.models.structures import PoseTarget
from apps.pavenet.models.two_stage import TwoStageReference, crop_windows
from tests.conftest import perturb_


def frames_for(cfg: ModelConfig, batch: int = 1) -> torch.Tensor:
    return torch.rand(batch, cfg.num_frames, 3, *cfg.image_size)


def test_default_model_layout():
    cfg = ModelConfig()
    model = PaveNet(cfg=cfg, init=False)

    assert cfg.num_tokens == 480
    assert model.num_stages == 5


def test_forward_shapes(tiny_model_config):
    model = build_model(tiny_model_config)
    out = model(frames_for(tiny_model_config, batch=2))

    assert len(out.stages) == model.num_stages == 3
    assert out.candidates.poses.shape == (2, tiny_model_config.num_tokens, 15, 2)
    assert out.final.poses.shape == (2, 4, 15, 2)
    assert out.final.logits.shape == (2, 4)
    assert (out.final.scales > 0).all()
    assert out.references.layers[-1].shape == (2, 4, 3, 15, 2)


@pytest.mark.parametrize(
    "variant, num_stages, num_frames",
    [
        ("pave", 3, 3),
        ("pave-ste", 3, 3),
        ("baseline-ste", 2, 3),
        ("no-stjd", 2, 3),
        ("no-decoders", 1, 3),
        ("random-refs", 2, 3),
        ("image-only", 3, 1),
    ],
)
def test_variants(tiny_model_config, variant, num_stages, num_frames):
    model = build_model(tiny_model_config, variant)
    assert model.cfg.num_frames == num_frames

    out = model(frames_for(model.cfg))
    assert len(out.stages) == model.num_stages == num_stages
    assert out.final.poses.shape == (1, 4, 15, 2)


def test_unknown_variant(tiny_model_config):
    with pytest.raises(ValueError, match="variant"):
        build_model(tiny_model_config, "pave-xl")


def test_frame_count_is_checked(tiny_model_config):
    model = build_model(tiny_model_config)
    with pytest.raises(DimensionError):
        model(torch.rand(1, 2, 3, *tiny_model_config.image_size))


def test_spatial_encoding_is_per_frame(tiny_model_config):
    model = build_model(tiny_model_config)
    frames = frames_for(tiny_model_config)
    changed = frames.clone()
    changed[:, 0] = 1.0 - changed[:, 0]

    encoded, _ = model.encode(frames)
    encoded_changed, _ = model.encode(changed)
    assert torch.equal(encoded[:, 1:], encoded_changed[:, 1:])
    assert not torch.allclose(encoded[:, 0], encoded_changed[:, 0])


def test_keyframe_initial_poses_ignore_auxiliary_frames(tiny_model_config):
    model = perturb_(build_model(tiny_model_config), std=0.05)
    frames = frames_for(tiny_model_config)
    changed = frames.clone()
    changed[:, 0] = torch.rand_like(changed[:, 0])
    changed[:, 2] = 1.0 - changed[:, 2]

    out, out_changed = model(frames), model(changed)
    assert torch.equal(out.candidates.poses, out_changed.candidates.poses)
    assert torch.equal(out.candidates.logits, out_changed.candidates.logits)
    assert torch.equal(out.references.initial, out_changed.references.initial)
    assert not torch.equal(out.final.poses, out_changed.final.poses)


def test_initial_references_are_shared_across_frames(tiny_model_config):
    model = perturb_(build_model(tiny_model_config), std=0.05)
    references = model(frames_for(tiny_model_config, batch=2)).references

    first = references.layers[0]
    for t in range(1, first.shape[2]):
        assert torch.equal(first[:, :, t], first[:, :, 0])
    assert torch.equal(first[:, :, 0], references.initial)


def test_forward_is_deterministic(tiny_model_config):
    torch.manual_seed(3)
    first = build_model(tiny_model_config)
    torch.manual_seed(3)
    second = build_model(tiny_model_config)
    frames = frames_for(tiny_model_config)

    assert torch.equal(first(frames).final.poses, second(frames).final.poses)


def test_checkpoint_round_trip(tiny_model_config, tmp_path):
    model = build_model(tiny_model_config)
    perturbed = {n: p + 0.01 * torch.randn_like(p) for n, p in model.state_dict().items()}
    model.load_state_dict(perturbed)
    save_checkpoint(model, tmp_path / "model.pave")

    restored = load_checkpoint(
        PaveNet(cfg=tiny_model_config, init=False).to(torch.float64), tmp_path / "model.pave"
    )
    frames = frames_for(tiny_model_config)
    assert torch.equal(model(frames).final.poses, restored(frames).final.poses)


def test_runner_threshold_and_order(tiny_model_config):
    model = build_model(tiny_model_config)
    frames = frames_for(tiny_model_config, batch=2)

    # initial confidences sit near 0.01
    assert all(len(poses) == 0 for poses, _ in PoseRunner(model, 0.3).predict_batch(frames))

    results = PoseRunner(model, 0.0).predict_batch(frames)
    assert len(results) == 2
    for poses, scores in results:
        assert poses.shape == (4, 15, 2)
        assert (scores[:-1] >= scores[1:]).all()


def test_loss_backward(tiny_model_config):
    model = build_model(tiny_model_config)
    targets = [
        PoseTarget(joints=torch.rand(2, 15, 2), visible=torch.ones(2, 15, dtype=torch.bool)),
        PoseTarget.empty(),
    ]
    loss = total_loss(model(frames_for(tiny_model_config, batch=2)).stages, targets)
    loss.total.backward()

    assert torch.isfinite(loss.total)
    assert loss.num_stages == model.num_stages
    grads = [p.grad for p in model.parameters() if p.grad is not None]
    assert grads and all(torch.isfinite(g).all() for g in grads)


@pytest.mark.parametrize("seed", range(3))
def test_loss_gradient_of_scale_head(tiny_model_config, seed):
    model = build_model(tiny_model_config)
    frames = frames_for(tiny_model_config)
    targets = [PoseTarget(joints=torch.rand(2, 15, 2), visible=torch.ones(2, 15, dtype=torch.bool))]
    name, param = next(
        (n, p) for n, p in model.named_parameters() if n.startswith("joint_decoder.scale_head")
    )

    def fn(value):
        out = functional_call(model, {name: value}, (frames,))
        return total_loss(out.stages, targets).total

    error = finite_difference_check(fn, param.detach(), max_coords=10, seed=seed, floor=1e-6)
    assert error < 1e-4


def test_two_stage_reference(tiny_model_config):
    reference = TwoStageReference(tiny_model_config)
    frames = torch.rand(3, 3, *tiny_model_config.image_size)
    boxes = torch.tensor([[2.0, 3.0, 20.0, 30.0], [30.0, 0.0, 47.0, 31.0]])

    poses = reference(frames, boxes)
    assert poses.shape == (2, 15, 2)
    assert reference(frames, boxes[:0]).shape == (0, 15, 2)


def test_crop_windows_pad_at_borders():
    frames = torch.arange(2 * 3 * 8 * 8, dtype=torch.float64).reshape(2, 3, 8, 8)
    crops = crop_windows(frames, torch.tensor([[0.0, 0.0], [4.0, 4.0]]), crop_size=4)

    assert crops.shape == (2, 2, 3, 4, 4)
    assert torch.equal(crops[1], frames[..., 2:6, 2:6])
    assert torch.equal(crops[0, ..., :2, :2], frames[..., :1, :1].expand(-1, -1, 2, 2))
