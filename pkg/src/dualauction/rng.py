"""Named, independent random sub-streams derived from one run seed.

Every source of randomness in a run (topology, costs, values, delays, mining,
learner draws, faults) gets its own stream so that changing one consumer does
not shift the draws seen by another.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *names: object) -> int:
    key = "/".join([str(seed), *map(str, names)]).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def substream(seed: int, *names: object) -> random.Random:
    return random.Random(derive_seed(seed, *names))


def truncated_gauss(rng: random.Random, mean: float, std: float, floor: float) -> float:
    """Normal draw clamped below at ``floor``."""
    return max(floor, rng.gauss(mean, std))
