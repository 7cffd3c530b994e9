"""Deterministic noise streams for stochastic integration.

Each trajectory gets an independent counter-based stream keyed by
``seed XOR trajectory_index`` so ensembles are reproducible regardless of
scheduling or chunking, and any single trajectory can be regenerated in
isolation.
"""
from __future__ import annotations

import numpy as np

_UINT64_MASK = (1 << 64) - 1


def stream_key(seed: int, trajectory_index: int = 0) -> int:
    """Key for the counter-based generator of one trajectory."""
    if seed < 0 or trajectory_index < 0:
        raise ValueError("seed and trajectory_index must be non-negative")
    return (int(seed) ^ int(trajectory_index)) & _UINT64_MASK


def generator(seed: int, trajectory_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, trajectory_index)))


def wiener_increments(seed: int, trajectory_index: int, n_steps: int,
                      dt: float) -> np.ndarray:
    """n_steps Gaussian increments of variance dt as a float64 array."""
    gen = generator(seed, trajectory_index)
    return gen.standard_normal(n_steps) * np.sqrt(dt)
