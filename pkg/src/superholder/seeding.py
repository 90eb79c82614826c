"""Deterministic seed derivation.

Every replicate stream is seeded with ``hash64(master_seed, module_id,
replicate_index)``: the 8-byte BLAKE2b digest (read little endian) of the
ASCII string ``"{master}:{module}:{index}"``.  The integer is then fed to
numpy's ``SeedSequence`` / ``PCG64``.
"""
from __future__ import annotations

import hashlib

import numpy as np

SCHEME = "blake2b-64('{master}:{module}:{index}') -> numpy.random.PCG64(SeedSequence)"


def hash64(master_seed: int, module_id: str, index: int) -> int:
    key = f"{int(master_seed)}:{module_id}:{int(index)}".encode("ascii")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def replicate_rng(master_seed: int, module_id: str, index: int) -> np.random.Generator:
    return np.random.default_rng(hash64(master_seed, module_id, index))
