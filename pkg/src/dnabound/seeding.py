"""Portable seed handling.

Every random stream in the package is a ``numpy.random.Generator`` backed by
PCG64 and keyed by a ``SeedSequence``.  Child streams are derived by appending
integer keys to the entropy, so ``derive(seed, 3, 1)`` is the same stream on
every platform and independent of how many other streams were drawn before.
"""

from __future__ import annotations

import numpy as np

# Fixed stream tags keep unrelated consumers of one experiment seed apart.
TAG_MESSAGE = 1
TAG_CHANNEL = 2
TAG_OFFSET = 3
TAG_PATTERN = 4
TAG_LABELS = 5
TAG_LIFT = 6
TAG_READ = 7


def derive(seed, *keys: int) -> np.random.Generator:
    """Return the generator for ``seed`` extended by ``keys``."""
    if seed is None:
        raise ValueError("a concrete integer seed is required")
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError("seeds and keys must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
