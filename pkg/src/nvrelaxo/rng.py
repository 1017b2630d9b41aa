"""Seed derivation.

Every random draw in the package comes from ``substream(seed, label, index)``:
a PCG64 stream keyed by the master seed, a stable hash of the task label and
an integer index. Work split into fixed-size chunks therefore produces the
same numbers no matter how many workers process the chunks.
"""

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """A 63-bit child seed, for handing to code that takes a plain integer."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), int(index)))
    hi, lo = (int(w) for w in ss.generate_state(2, dtype=np.uint32))
    return ((hi << 32) | lo) >> 1


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(int(seed), "root")
