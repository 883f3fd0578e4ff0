"""Seeded random streams shared by the noise and augmentation code.

Every stream is a Philox4x64 counter-based generator keyed through a
``SeedSequence``; Gaussian variates come from Box-Muller on its uniform
doubles, so the same seed gives the same numbers on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(*key: int) -> np.random.Generator:
    """Return an independent generator for an integer key tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def gaussian(gen: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` standard normal variates with the Box-Muller transform."""
    if n <= 0:
        return np.zeros(0)
    pairs = (n + 1) // 2
    u1 = gen.random(pairs)
    u2 = gen.random(pairs)
    # 1 - u1 lies in (0, 1], so the log is finite
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def stable_hash(*parts: object) -> int:
    """63-bit integer digest of the string forms of ``parts``."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
