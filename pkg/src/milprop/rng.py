"""Single source of randomness for the whole package.

The bit generator is pinned to PCG64 so that a given seed produces the same
stream across numpy releases and platforms. Every module that needs
randomness takes a seed (or a Generator) and routes it through here.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide deterministic generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))
