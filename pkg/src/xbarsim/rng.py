"""Deterministic random-number streams.

All randomness in an experiment flows from one root seed.  Sub-streams are
addressed by label, e.g. ``stream(seed, "device", row, col)``, so adding or
reordering consumers of one stream never perturbs the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_sequence(root_seed: int, *labels) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream addressed by ``labels`` under ``root_seed``."""
    key = tuple(zlib.crc32(str(label).encode("utf-8")) for label in labels)
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=key)


def stream(root_seed: int, *labels) -> np.random.Generator:
    """A Generator seeded from the (root seed, labels) address."""
    return np.random.default_rng(seed_sequence(root_seed, *labels))
