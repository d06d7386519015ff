"""Reconstruction quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import Image

__all__ = ["QualityReport", "psnr", "format_psnr"]

PEAK = 255.0


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    mse: float
    peak: float = PEAK


def _pixels(img):
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)


def psnr(reference, reconstructed, peak: float = PEAK) -> QualityReport:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    ref, rec = _pixels(reference), _pixels(reconstructed)
    if ref.shape != rec.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {rec.shape}")
    mse = float(np.mean((ref - rec) ** 2))
    if mse == 0.0:
        return QualityReport(math.inf, 0.0, peak)
    return QualityReport(10.0 * math.log10(peak * peak / mse), mse, peak)


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"
