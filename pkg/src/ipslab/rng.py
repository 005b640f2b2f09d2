"""Replica random-number streams.

Every replica gets its own stream keyed by ``(master_seed, *key)``.  Streams
are Philox (counter based) generators built from a ``SeedSequence`` with the
key as spawn key, so replica ``k`` sees the same numbers whatever the total
replica count or scheduling order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "kernel_seeds", "derive_seed"]

# Distinct top-level namespaces so that e.g. the contact sampler and the
# braco sampler never share a stream even when called with equal keys.
NAMESPACES = {
    "contact": 1,
    "braco": 2,
    "resem": 3,
    "thin": 4,
    "wf": 5,
    "renorm": 6,
    "catalytic": 7,
    "ancestral": 8,
    "binsplit": 9,
    "campbell": 10,
    "oracle": 11,
    "misc": 99,
}


def _key(namespace: str | int, key) -> tuple[int, ...]:
    ns = NAMESPACES[namespace] if isinstance(namespace, str) else int(namespace)
    return (ns,) + tuple(int(k) for k in key)


def stream(seed: int, namespace: str | int, *key: int) -> np.random.Generator:
    """Return the Philox generator for ``(seed, namespace, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(namespace, key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, namespace: str | int, *key: int) -> int:
    """A 63-bit integer seed derived from the same key material as :func:`stream`."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(namespace, key))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 32 | int(lo)) & 0x7FFF_FFFF_FFFF_FFFF)


def kernel_seeds(seed: int, namespace: str | int, reps: int, *key: int, start: int = 0) -> np.ndarray:
    """Per-replica integer seeds for compiled kernels (replica ``r`` -> key ``(*key, r)``).

    Compiled kernels reseed their internal generator with ``seeds[r]`` before
    replica ``r``; this keeps replica streams independent of ``reps``.
    """
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        out[r] = derive_seed(seed, namespace, *key, start + r)
    return out
