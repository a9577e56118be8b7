"""Low-discrepancy sample points over a coordinate box.

A Halton sequence gives reproducible coverage; the seed only fast-forwards
the sequence, so reports are byte-identical for identical flags.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def halton_points(box: list[tuple[float, float]], count: int, seed: int = 0) -> list[np.ndarray]:
    """``count`` points inside the axis-aligned box (list of (lo, hi))."""
    dim = len(box)
    if dim == 0:
        return [np.zeros(0) for _ in range(count)]
    sampler = qmc.Halton(d=dim, scramble=False)
    if seed:
        sampler.fast_forward(int(seed))
    raw = sampler.random(count)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    pts = qmc.scale(raw, lo, hi)
    return [pts[i] for i in range(count)]


def box_center(box: list[tuple[float, float]]) -> np.ndarray:
    return np.array([(lo + hi) / 2.0 for lo, hi in box])


def random_points(box: list[tuple[float, float]], count: int, seed: int = 0) -> list[np.ndarray]:
    """Plain uniform points (used by property tests, not by reports)."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    if len(box) == 0:
        return [np.zeros(0) for _ in range(count)]
    return [lo + (hi - lo) * rng.random(len(box)) for _ in range(count)]
