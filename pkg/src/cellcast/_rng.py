"""Seed-stream derivation shared by every randomized component.

All randomness in the package flows through one scheme: a master seed plus a
tuple of integer stream ids is fed to ``numpy.random.SeedSequence``, which
keys a PCG64 generator.  Distinct id tuples yield statistically independent
streams, so per-series / per-trajectory work is reproducible regardless of
execution order.  The derivation is part of the on-disk provenance contract
and is documented in the README.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(*ids: int) -> np.random.Generator:
    """Return the PCG64 generator keyed by the integer id tuple ``ids``."""
    for x in ids:
        if not isinstance(x, (int, np.integer)):
            raise TypeError(f"stream ids must be integers, got {x!r}")
    return np.random.default_rng(np.random.SeedSequence(tuple(int(x) for x in ids)))
