from __future__ import annotations

from environs import Env


env = Env()
env.read_env()


def debug_enabled() -> bool:
    """Finiteness checks after every encoder/decoder block."""
    return env.bool("PAVENET_DEBUG", False)


def num_threads() -> int | None:
    return env.int("PAVENET_NUM_THREADS", None)


def run_slow() -> bool:
    return env.bool("PAVENET_RUN_SLOW", False)
