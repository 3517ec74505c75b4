"""Deterministic seed derivation.

A single master seed drives an experiment; every (sweep point, trial,
stage) combination derives an independent child seed through
``numpy.random.SeedSequence`` spawn keys, so results do not depend on
execution order or thread count.
"""
from __future__ import annotations

import zlib

import numpy as np

from .errors import ParameterError


def _key_part(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ParameterError(f"seed key parts must be non-negative, got {part}")
        return int(part)
    raise ParameterError(f"seed key parts must be int or str, got {type(part).__name__}")


def child_seed(master: int, *parts: int | str) -> int:
    """Derive a 64-bit child seed from a master seed and a key path."""
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(_key_part(p) for p in parts))
    return int(seq.generate_state(1, np.uint64)[0])


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))
