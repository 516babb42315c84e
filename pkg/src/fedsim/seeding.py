"""Hierarchical seed derivation.

Every stochastic choice in a run draws from a generator keyed by the full
context path, e.g. ``rng(master_seed, repeat, round, client_id, "train")``.
Adding or removing one consumer never shifts the stream of another, so
experiment arms stay comparable and schedules can change order freely.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(*parts: int | str) -> int:
    """Collapse a context path into a 128-bit integer key."""
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        if isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        elif isinstance(part, str):
            h.update(b"s" + part.encode("utf-8") + b"\x00")
        else:
            raise TypeError(f"seed part must be int or str, got {type(part)!r}")
    return int.from_bytes(h.digest(), "little")


def rng(*parts: int | str) -> np.random.Generator:
    """Counter-based generator for the given context path."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))
