"""Flat binary parameter files.

Layout (little endian)::

    b"PAVE" | u32 version | u32 count
    count x ( u32 name_len | utf-8 name | u32 rank | rank x u64 dim | f64 payload )

Payloads are row-major float64, so a save/load round trip is bit exact.
"""
from __future__ import annotations

import logging
import struct
from collections import OrderedDict
from collections.abc import Mapping
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from apps.pavenet.core.errors import CheckpointError


MAGIC = b"PAVE"
FORMAT_VERSION = 1

logger = logging.getLogger(name=__name__)


def save_state_dict(state: Mapping[str, Tensor], path: str | Path) -> None:
    with open(path, "wb") as stream:
        stream.write(MAGIC)
        stream.write(struct.pack("<II", FORMAT_VERSION, len(state)))

        for name, tensor in state.items():
            encoded = name.encode("utf-8")
            array = tensor.detach().cpu().to(torch.float64).contiguous().numpy()

            stream.write(struct.pack("<I", len(encoded)))
            stream.write(encoded)
            stream.write(struct.pack("<I", array.ndim))
            stream.write(struct.pack(f"<{array.ndim}Q", *array.shape))
            stream.write(array.astype("<f8", copy=False).tobytes(order="C"))


def _unpack(fmt: str, data: bytes, offset: int) -> tuple[tuple, int]:
    size = struct.calcsize(fmt)
    if offset + size > len(data):
        raise CheckpointError(
            f"checkpoint is truncated at byte {offset}, expected {size} more bytes"
        )

    return struct.unpack_from(fmt, data, offset), offset + size


def load_state_dict(path: str | Path) -> OrderedDict[str, Tensor]:
    """Reads a parameter file written by :func:`save_state_dict`.

    Raises:
        CheckpointError: on wrong magic, unsupported version or truncation.
    """
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(
            f"{path} is not a parameter file, magic should be {MAGIC!r}, but got {data[:4]!r}"
        )

    (version, count), offset = _unpack("<II", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version should be {FORMAT_VERSION}, but got {version}"
        )

    state: OrderedDict[str, Tensor] = OrderedDict()
    for _ in range(count):
        (name_len,), offset = _unpack("<I", data, offset)
        if offset + name_len > len(data):
            raise CheckpointError(f"checkpoint is truncated at byte {offset}")
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len

        (rank,), offset = _unpack("<I", data, offset)
        shape, offset = _unpack(f"<{rank}Q", data, offset)

        numel = int(np.prod(shape, dtype=np.int64)) if rank else 1
        if offset + 8 * numel > len(data):
            raise CheckpointError(
                f"checkpoint is truncated inside the payload of {name!r}"
            )
        array = np.frombuffer(data, dtype="<f8", count=numel, offset=offset)
        offset += 8 * numel

        state[name] = torch.from_numpy(array.reshape(shape).copy())

    if offset != len(data):
        raise CheckpointError(
            f"checkpoint has {len(data) - offset} trailing bytes after {count} parameters"
        )

    return state


def save_checkpoint(model: nn.Module, path: str | Path) -> None:
    save_state_dict(model.state_dict(), path)
    logger.info(f"saved {len(model.state_dict())} parameters to {path}")


def load_checkpoint(model: nn.Module, path: str | Path) -> nn.Module:
    """Loads a parameter file into ``model``; names and shapes must match."""
    state = load_state_dict(path)
    expected = model.state_dict()

    missing = sorted(set(expected) - set(state))
    unexpected = sorted(set(state) - set(expected))
    if missing or unexpected:
        raise CheckpointError(
            f"checkpoint {path} does not fit the model: missing {missing}, unexpected {unexpected}"
        )
    for name, tensor in state.items():
        if tuple(tensor.shape) != tuple(expected[name].shape):
            raise CheckpointError(
                f"parameter {name} should have shape {tuple(expected[name].shape)}, but got {tuple(tensor.shape)}"
            )

    model.load_state_dict(
        {name: t.to(expected[name].dtype) for name, t in state.items()}
    )
    logger.info(f"loaded {len(state)} parameters from {path}")

    return model
