from __future__ import annotations

import json
import logging
import random
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np
import torch
from omegaconf import OmegaConf
from pydantic import ValidationError

from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.core.errors import ConfigError
from apps.pavenet.core.settings import num_threads


logger = logging.getLogger(name=__name__)


def read_key_value_file(path: str | Path) -> list[str]:
    """Dotlist entries of a flat ``key = value`` file; ``#`` starts a
    comment.

    Args:
        path (str | Path): config file.

    Raises:
        ConfigError: if a line has no ``=``.
    """
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"line {number} of {path} should be 'key = value', but got {line!r}",
                    [line],
                )
            key, value = line.split("=", 1)
            entries.append(f"{key.strip()}={value.strip()}")

    return entries


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Reads a YAML (``.yaml``/``.yml``) or flat ``key = value`` file."""
    path = Path(path)
    if path.suffix in (".yaml", ".yml"):
        conf = OmegaConf.load(path)
    else:
        conf = OmegaConf.from_dotlist(read_key_value_file(path))

    return OmegaConf.to_container(conf, resolve=True) or {}


def load_run_config(
    path: str | Path | None = None,
    overrides: Iterable[str] = (),
    **flags: Any,
) -> RunConfig:
    """Resolves a run configuration.

    Priority, lowest first: defaults, the config file, ``flags`` (dotted
    keys, ``None`` values are skipped), then ``key=value`` ``overrides``.

    Raises:
        ConfigError: if validation fails; ``keys`` lists the dotted names of
            the offending keys.
    """
    conf = OmegaConf.create(load_config_file(path) if path is not None else {})
    flag_entries = [f"{key}={value}" for key, value in flags.items() if value is not None]
    for entries in (flag_entries, list(overrides)):
        for entry in entries:
            if "=" not in entry:
                raise ConfigError(f"override should be 'key=value', but got {entry!r}", [entry])
        if entries:
            conf = OmegaConf.merge(conf, OmegaConf.from_dotlist(entries))

    try:
        config = RunConfig.parse_obj(OmegaConf.to_container(conf, resolve=True))
    except ValidationError as e:
        keys = [".".join(str(part) for part in error["loc"]) for error in e.errors()]
        raise ConfigError(f"invalid run configuration: {', '.join(keys)}", keys) from e

    logger.info(f"configuration resolved: variant={config.variant} seed={config.seed}")

    return config


def dump_run_config(config: RunConfig, path: str | Path) -> None:
    """Writes the YAML echo of ``config``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    OmegaConf.save(OmegaConf.create(json.loads(config.json())), path)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def configure_torch(threads: int | None = None) -> None:
    """float64 defaults, deterministic kernels and the thread count
    (``PAVENET_NUM_THREADS`` unless given)."""
    torch.set_default_dtype(torch.float64)
    torch.use_deterministic_algorithms(True)
    threads = threads if threads is not None else num_threads()
    if threads is not None:
        torch.set_num_threads(threads)
