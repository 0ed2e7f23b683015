"""
Stable seed derivation

Sub-seeds are the first 8 bytes of a BLAKE2b digest over the master seed and
the identifying parts, so streams never depend on Python's salted hash().
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *parts) -> int:
    """64-bit sub-seed for (master_seed, *parts)"""
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(master_seed)).encode("utf-8"))
    for part in parts:
        digest.update(b"\x1f")
        digest.update(str(part).encode("utf-8"))
    return int.from_bytes(digest.digest(), "big")


def rng_for(master_seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))
