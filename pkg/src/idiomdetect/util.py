"""Seed derivation shared by every randomized component.

All randomness in an experiment flows from one master seed.  Each use site
(split, init, dropout, shuffle, ...) gets its own named substream so that
components can be re-run in isolation without perturbing each other.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named use of the master seed."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


def derive_seed(seed: int, name: str) -> int:
    """Plain integer sub-seed, for APIs that take a seed rather than a generator."""
    return int(substream(seed, name).integers(0, 2**63 - 1))
