"""Synthetic test images."""

from __future__ import annotations

import numpy as np

from .imaging import Image
from .sensing import rng_from_seed

__all__ = ["smooth_image", "ramp_image"]


def smooth_image(shape=(64, 64), seed: int = 0, max_freq: int = 3, terms: int = 6) -> Image:
    """Sum of random low-frequency cosines, rescaled to ``[16, 239]``.

    Every spatial frequency is at most ``max_freq`` cycles across the image.
    """
    rng = rng_from_seed(seed)
    m, n = shape
    r = np.arange(m)[:, None] / m
    c = np.arange(n)[None, :] / n
    img = np.zeros(shape)
    for _ in range(terms):
        fr, fc = rng.uniform(0.0, max_freq, size=2)
        pr, pc = rng.uniform(0.0, 2 * np.pi, size=2)
        img += rng.normal() * np.cos(2 * np.pi * fr * r + pr) * np.cos(2 * np.pi * fc * c + pc)
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    return Image(16.0 + 223.0 * img)


def ramp_image(shape=(64, 64), row_slope: float = 1.0, col_slope: float = 2.0, offset: float = 0.0) -> Image:
    """Separable linear ramp ``offset + row_slope * i + col_slope * j``."""
    m, n = shape
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    return Image(offset + row_slope * i + col_slope * j + 0.0 * i * j)
