"""Seeded generators split into named, fixed streams.

Every random draw in the package goes through ``stream(seed, label, *extra)``
so that adding a consumer in one module never shifts another module's draws.
"""
import zlib

import numpy as np

STREAMS = ("init_logits", "synth", "mock_tokens", "random_instances")


def _label_key(label):
    return zlib.crc32(label.encode("utf-8"))


def stream(seed, label, *extra):
    """Return an independent ``np.random.Generator`` for ``(seed, label, *extra)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = (_label_key(label),) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
