"""
Seed derivation so every random stream traces back to one run seed
"""

import hashlib

import numpy as np


def derive_seed(seed: int, purpose: str) -> int:
    """Stable 64-bit child seed for a named purpose"""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int, purpose: str) -> np.random.Generator:
    """Generator seeded from (seed, purpose)"""
    return np.random.default_rng(derive_seed(seed, purpose))
