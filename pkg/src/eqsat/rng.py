"""Random sources.

Production randomness is a numpy ``Generator`` over the ChaCha20 keystream
keyed from OS entropy. Seeded runs use numpy's default PCG64 instead: they are
reproducible test streams, not secrets, and PCG64 is several times faster.
"""

from __future__ import annotations

import secrets

import numpy as np
from randomgen import ChaCha


def secure() -> np.random.Generator:
    """Generator keyed with 256 bits from the OS entropy pool."""
    return np.random.Generator(ChaCha(key=secrets.randbits(256), counter=0, rounds=20))


def deterministic(seed: int) -> np.random.Generator:
    """Reproducible generator for tests and ``--seed``; not secure."""
    return np.random.default_rng(int(seed))


def resolve(rng: np.random.Generator | int | None) -> np.random.Generator:
    if rng is None:
        return secure()
    if isinstance(rng, (int, np.integer)):
        return deterministic(int(rng))
    return rng


def draw_entropy(rng: np.random.Generator) -> np.ndarray:
    """256 bits from ``rng`` used as the root of a family of substreams."""
    return rng.integers(0, 1 << 32, size=8, dtype=np.uint64)


def substream(parent: np.random.Generator, entropy: np.ndarray, index: int) -> np.random.Generator:
    """Independent stream number ``index`` below ``entropy``.

    Streams depend only on (entropy, index), so work split across threads
    reproduces sequential output. The bit generator family follows ``parent``.
    """
    seq = np.random.SeedSequence([int(x) for x in entropy], spawn_key=(int(index),))
    if isinstance(parent.bit_generator, ChaCha):
        return np.random.Generator(ChaCha(seed=seq, rounds=20))
    return np.random.Generator(type(parent.bit_generator)(seq))
