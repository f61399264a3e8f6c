import struct

import pytest
import torch
import torch.nn as nn

from apps.pavenet.core.checkpoint import (
    MAGIC,
    load_checkpoint,
    load_state_dict,
    save_checkpoint,
    save_state_dict,
)
from apps.pavenet.core.errors import CheckpointError


@pytest.fixture
def model() -> nn.Module:
    torch.manual_seed(0)
    return nn.Sequential(nn.Linear(4, 3), nn.GELU(), nn.Linear(3, 2))


def test_round_trip_is_bit_exact(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(model, path)

    state = load_state_dict(path)
    assert list(state) == list(model.state_dict())
    for name, tensor in model.state_dict().items():
        assert torch.equal(state[name], tensor)


def test_load_into_fresh_model(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(model, path)

    fresh = nn.Sequential(nn.Linear(4, 3), nn.GELU(), nn.Linear(3, 2))
    load_checkpoint(fresh, path)
    x = torch.randn(5, 4)
    assert torch.equal(fresh(x), model(x))


def test_scalar_and_empty_tensors(tmp_path):
    path = tmp_path / "odd.pave"
    save_state_dict({"scalar": torch.tensor(2.5), "empty": torch.zeros(0, 3)}, path)

    state = load_state_dict(path)
    assert state["scalar"].shape == () and float(state["scalar"]) == 2.5
    assert state["empty"].shape == (0, 3)


def test_bad_magic(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(model, path)
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))

    with pytest.raises(CheckpointError, match="magic"):
        load_state_dict(path)


def test_unsupported_version(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(model, path)
    data = bytearray(path.read_bytes())
    data[len(MAGIC) : len(MAGIC) + 4] = struct.pack("<I", 2)
    path.write_bytes(bytes(data))

    with pytest.raises(CheckpointError, match="version"):
        load_state_dict(path)


def test_truncated_payload(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(model, path)
    path.write_bytes(path.read_bytes()[:-5])

    with pytest.raises(CheckpointError, match="truncated"):
        load_state_dict(path)


def test_missing_parameter(model, tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(nn.Linear(4, 3), path)

    with pytest.raises(CheckpointError, match="missing"):
        load_checkpoint(model, path)


def test_shape_mismatch(tmp_path):
    path = tmp_path / "model.pave"
    save_checkpoint(nn.Linear(4, 3), path)

    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(nn.Linear(5, 3), path)
