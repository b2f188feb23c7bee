"""Named seed derivation.

Every random stream is derived from one 64-bit root seed plus a purpose
string, so results never depend on call order or thread scheduling.
"""

import hashlib
import os

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *purpose) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & MASK64).encode())
    for part in purpose:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *purpose) -> np.random.Generator:
    if not purpose:
        return np.random.default_rng(int(seed) & MASK64)
    return np.random.default_rng(derive_seed(seed, *purpose))


def thread_cap() -> int:
    """Worker count from ``TAILSAMPLER_THREADS``; 0 means run sequentially."""
    raw = os.environ.get("TAILSAMPLER_THREADS", "0").strip()
    try:
        return max(0, int(raw))
    except ValueError:
        return 0
