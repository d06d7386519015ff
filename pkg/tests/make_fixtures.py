"""Regenerate the 64x64 PGM fixtures in tests/data from scikit-image samples.

Each source is converted to gray, block-averaged by 4 and center-cropped.
Run once; the outputs are committed so the test suite does not need
scikit-image.
"""

from pathlib import Path

import numpy as np
from skimage import color, data

from liftcs.imaging import Image, save_image

SOURCES = ("camera", "astronaut", "chelsea", "coffee", "moon")
OUT = Path(__file__).parent / "data"


def prepare(raw, size=64, factor=4):
    if raw.ndim == 3:
        img = color.rgb2gray(raw[..., :3]) * 255.0
    else:
        img = np.asarray(raw, dtype=float)
    h, w = (img.shape[0] // factor) * factor, (img.shape[1] // factor) * factor
    small = img[:h, :w].reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
    r0 = (small.shape[0] - size) // 2
    c0 = (small.shape[1] - size) // 2
    return small[r0 : r0 + size, c0 : c0 + size]


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name in SOURCES:
        save_image(Image(prepare(getattr(data, name)())), OUT / f"{name}.pgm")
        print(name)
