"""Seed handling.

All randomness flows from one integer seed.  Streams are derived with
``SeedSequence`` over a key path (seed, trial index, ...) and drive a Philox
counter-based generator, so the stream of trial ``i`` does not depend on how
many workers ran the other trials.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for ``(seed, *path)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(p) for p in path)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def trial_rngs(seed: int, trials: int) -> list[np.random.Generator]:
    return [make_rng(seed, i) for i in range(trials)]
