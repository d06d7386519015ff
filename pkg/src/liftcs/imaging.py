"""Grayscale image container, 8-bit file I/O, and 1-D scan conversion."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Image",
    "ScanSignal",
    "ImageFormatError",
    "load_image",
    "save_image",
    "to_bytes",
    "scan",
    "unscan",
    "vec",
    "unvec",
]

AXES = ("column", "row")


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2:
            raise ValueError(f"image must be 2-D, got shape {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def vec(pixels) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(pixels, dtype=float).ravel(order="F")


def unvec(values, shape) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(shape, order="F")


# ---------------------------------------------------------------------------
# File I/O


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated PGM header")
    return data[start:pos], pos


def _decode_pgm(data: bytes) -> np.ndarray:
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise ImageFormatError(f"unsupported PGM magic {magic!r}; only binary P5 is read")
    try:
        width, pos = _read_token(data, pos)
        height, pos = _read_token(data, pos)
        maxval, pos = _read_token(data, pos)
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError as exc:
        raise ImageFormatError("malformed PGM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"unsupported PGM maxval {maxval}; only 8-bit is supported")
    pos += 1  # single whitespace byte after maxval
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise ImageFormatError("truncated PGM pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def _decode_png(path: Path) -> np.ndarray:
    from PIL import Image as PILImage

    try:
        with PILImage.open(path) as im:
            if im.mode != "L":
                raise ImageFormatError(
                    f"unsupported PNG mode {im.mode!r}; only 8-bit grayscale is supported"
                )
            return np.asarray(im, dtype=np.uint8)
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"cannot read PNG {path}: {exc}") from exc


def load_image(path) -> Image:
    """Load an 8-bit grayscale binary PGM (P5) or PNG."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        px = _decode_png(path)
    else:
        px = _decode_pgm(data)
    return Image(px.astype(float))


def to_bytes(img: Image) -> np.ndarray:
    """Clamp to [0, 255] and round half up."""
    px = np.clip(img.pixels, 0.0, 255.0)
    return np.floor(px + 0.5).astype(np.uint8)


def save_image(img: Image, path) -> None:
    """Write ``img`` as binary PGM, or PNG when ``path`` ends in ``.png``."""
    path = Path(path)
    raw = to_bytes(img)
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(raw, mode="L").save(path)
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + raw.tobytes())


# ---------------------------------------------------------------------------
# Scanning


@dataclass(frozen=True)
class ScanSignal:
    values: np.ndarray
    origin_shape: tuple[int, int]
    axis: str = "column"
    strategy: int = 2

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.strategy not in (1, 2):
            raise ValueError("strategy must be 1 or 2")
        m, n = self.origin_shape
        if np.size(self.values) != m * n:
            raise ValueError(
                f"scan of length {np.size(self.values)} does not match shape {self.origin_shape}"
            )


def _lines(pixels, axis):
    # each row of the result is one scanned line
    return pixels.T if axis == "column" else pixels


def scan(img: Image, axis: str = "column", strategy: int = 2) -> ScanSignal:
    """Flatten ``img`` into a 1-D signal line by line.

    Strategy 1 stacks columns (or rows) in natural order. Strategy 2 reverses
    every second line (0-based indices 1, 3, 5, ...) so that consecutive
    samples stay 4-neighbours.
    """
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    lines = _lines(pixels, axis).copy()
    if strategy == 2:
        lines[1::2] = lines[1::2, ::-1]
    elif strategy != 1:
        raise ValueError("strategy must be 1 or 2")
    return ScanSignal(lines.ravel(), tuple(pixels.shape), axis, strategy)


def unscan(sig: ScanSignal) -> Image:
    m, n = sig.origin_shape
    values = np.asarray(sig.values, dtype=float)
    lines = values.reshape((n, m) if sig.axis == "column" else (m, n)).copy()
    if sig.strategy == 2:
        lines[1::2] = lines[1::2, ::-1]
    return Image(lines.T if sig.axis == "column" else lines)
