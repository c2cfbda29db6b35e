"""Keyed, splittable random substreams.

Noise draws are keyed by content (entry index, basis index, repeat
number, ...) rather than by call order, so results do not depend on
iteration or thread order. String tags are folded to integers with
crc32; everything below is a thin wrapper over numpy's SeedSequence.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _fold(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & _MASK64


def substream(seed: int, *key: int | str) -> np.random.Generator:
    """Generator for the substream identified by (seed, *key)."""
    entropy = [_fold(seed)] + [_fold(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *key: int | str) -> int:
    """Stable 64-bit child seed for (seed, *key)."""
    entropy = [_fold(seed)] + [_fold(k) for k in key]
    return int(np.random.SeedSequence(entropy).generate_state(2, np.uint32)[0])


def laplace_from_uniform(u: np.ndarray | float, scale: float) -> np.ndarray | float:
    """Inverse-CDF Laplace draw from one uniform per coordinate.

    scale == 0 is allowed and yields exactly zero noise.
    """
    u = np.asarray(u, dtype=float)
    # u == 0.0 would map to -inf; it sits one ulp away from a legal draw.
    u = np.where(u == 0.0, 2.0**-53, u)
    centered = u - 0.5
    out = -scale * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))
    if out.ndim == 0:
        return float(out)
    return out
