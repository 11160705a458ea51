"""Seed derivation. Every random stream in the package is keyed from here."""

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit seed."""
    entropy = [int(p) & _MASK64 for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def generator(*parts: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
