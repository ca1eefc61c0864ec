"""Deterministic seed derivation for reproducible parallel trials.

All randomness in the package flows from a single 64-bit master seed.
Sub-streams (per operation, per trial, per grid cell) are derived by
hashing the master seed together with a label path, so any unit of work
can be recomputed in isolation and execution order or parallelism never
changes the numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_entropy", "derive_rng"]


def _encode(parts: tuple) -> bytes:
    # repr() of ints/floats/strings is stable across runs and platforms;
    # Python's salted hash() is not, so it must never be used here.
    return "\x1f".join(repr(p) for p in parts).encode("utf-8")


def derive_entropy(master: int, *parts) -> list[int]:
    """Derive a SeedSequence entropy list from a master seed and a label path.

    Parameters are hashed with blake2b, so distinct label paths give
    independent streams while identical paths reproduce the same stream.
    """
    digest = hashlib.blake2b(_encode(parts), digest_size=16).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return [int(master) & 0xFFFFFFFFFFFFFFFF, *words]


def derive_rng(master: int, *parts) -> np.random.Generator:
    """Return a Generator seeded from (master, *parts), deterministically."""
    return np.random.default_rng(np.random.SeedSequence(derive_entropy(master, *parts)))
