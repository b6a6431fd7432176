"""Deterministic per-sample random streams keyed by probe content.

Each Monte Carlo sample gets its own counter-based generator whose key
combines a base seed with a content hash of the probe phase point, so
results are reproducible and independent of probe ordering or batching.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def probe_key(x, v):
    """64-bit content key for a probe (x padded to 3 components, v)."""
    b = np.zeros(6)
    x = np.ravel(np.asarray(x, float))
    b[: x.size] = x
    b[3:] = np.ravel(np.asarray(v, float))
    h = hashlib.sha256(b.tobytes()).digest()
    return int.from_bytes(h[:8], "little")


def base_seed_from(rng):
    """Extract a base seed: pass ints through, draw once from a Generator."""
    if isinstance(rng, (int, np.integer)):
        return int(rng) & _MASK64
    return int(rng.integers(0, 1 << 63))


def sample_stream(base_seed, key, index):
    """Fresh generator for sample `index` of the probe with content `key`."""
    # the key must be an explicit uint64 array: a plain int list would be
    # coerced through float64 and lose the low bits that separate streams
    k = np.array([base_seed & _MASK64, (key + index) & _MASK64],
                 dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=k))
