"""Deterministic 64-bit seed derivation for reproducible generation."""

import hashlib

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 avalanche step over 64-bit unsigned ints."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, *indices: int) -> int:
    """Mix integer indices into a master seed.

    The result depends only on (master_seed, indices), never on generation
    order, so corpus generation can parallelize or resume safely.
    """
    x = master_seed & _MASK64
    for ix in indices:
        x = splitmix64(x ^ splitmix64(ix & _MASK64))
    return x


def stable_hash64(text: str) -> int:
    """Platform-stable 64-bit hash of a string (builtin hash is salted)."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
