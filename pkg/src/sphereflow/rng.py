"""Deterministic RNG substreams for trajectory ensembles.

A trajectory's stream is derived from (master seed, trajectory index) by
seed-sequence spawning, which is collision-free by construction and
independent of worker scheduling: the same pair always yields the same
stream, different pairs yield statistically independent streams.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

__all__ = ["derive_substream"]


def derive_substream(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Generator for one trajectory, reproducible across runs and workers."""
    if not (0 <= master_seed < 2**64):
        raise ConfigurationError(f"master_seed must fit in a u64, got {master_seed}")
    if trajectory_index < 0:
        raise ConfigurationError(f"trajectory_index must be >= 0, got {trajectory_index}")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(trajectory_index,))
    return np.random.Generator(np.random.PCG64(ss))
