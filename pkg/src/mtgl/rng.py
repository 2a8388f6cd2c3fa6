"""Reproducible random streams.

Every replicate draws from its own Philox-4x64 counter-based generator whose
key is derived from the master seed and the replicate index by splitmix64.
"""

from __future__ import annotations

import os

import numpy as np

PRNG_NAME = "philox4x64-10/splitmix64"
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
SEED_ENV = "MTGL_SEED"


def splitmix64(x: int) -> int:
    """One output of the splitmix64 finalizer applied to state ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(master: int, index: int) -> int:
    return splitmix64((master + (index + 1) * GOLDEN_GAMMA) & MASK64)


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed & MASK64))


def resolve_seed(seed: int | None, default: int = 0) -> tuple[int, bool]:
    """The effective master seed and whether the environment override applied."""
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env, 0) & MASK64, True
    return (default if seed is None else int(seed)) & MASK64, False
