"""Measurement operators: partial canonical identity (PCI) and dense block CS.

Pixels are addressed through the column-major vectorization ``vec(X)``.
Randomness comes from numpy's Philox generator, a counter-based bit
generator, so masks and matrices are reproducible from the seed alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import Image, unvec, vec

__all__ = [
    "SampleMask",
    "DenseSensing",
    "make_pci",
    "sense_pci",
    "embed_zeros",
    "make_dense",
    "sense_dense",
    "dense_adjoint",
    "write_mask",
    "read_mask",
    "write_measurements",
    "read_measurements",
    "Measurements",
]


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _count(ratio, total):
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must lie in (0, 1], got {ratio}")
    count = int(np.floor(ratio * total + 0.5))
    if count < 1:
        raise ValueError(f"ratio {ratio} yields no measurements for {total} samples")
    return count


@dataclass(frozen=True)
class SampleMask:
    omega: np.ndarray
    shape: tuple[int, int]
    seed: int | None = None

    def __post_init__(self):
        omega = np.array(self.omega, dtype=np.int64).ravel()
        n = self.shape[0] * self.shape[1]
        if omega.size and (omega.min() < 0 or omega.max() >= n):
            raise ValueError("mask indices out of range")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("mask indices must be strictly increasing")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))

    @property
    def m(self) -> int:
        return self.omega.size

    @property
    def n(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def ratio(self) -> float:
        return self.m / self.n


def make_pci(shape, ratio: float, seed: int = 0) -> SampleMask:
    """Draw ``round(ratio * N)`` pixel positions uniformly without replacement."""
    shape = tuple(int(v) for v in shape)
    total = shape[0] * shape[1]
    count = _count(ratio, total)
    rng = rng_from_seed(seed)
    omega = np.sort(rng.choice(total, size=count, replace=False))
    return SampleMask(omega, shape, seed)


def sense_pci(img, mask: SampleMask) -> np.ndarray:
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)
    if tuple(pixels.shape) != mask.shape:
        raise ValueError(f"image shape {pixels.shape} does not match mask shape {mask.shape}")
    return vec(pixels)[mask.omega]


def embed_zeros(y, mask: SampleMask) -> Image:
    """Scatter measurements into a zero image (transpose of :func:`sense_pci`)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (mask.m,):
        raise ValueError(f"expected {mask.m} measurements, got {y.shape}")
    x = np.zeros(mask.n)
    x[mask.omega] = y
    return Image(unvec(x, mask.shape))


# ---------------------------------------------------------------------------
# Dense block compressed sensing


@dataclass(frozen=True)
class DenseSensing:
    kind: str
    shape: tuple[int, int]
    block: int
    ratio: float
    seed: int = 0
    matrix: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown dense sensing kind {self.kind!r}")
        m, n = self.shape
        if self.block < 1 or m % self.block or n % self.block:
            raise ValueError(f"block {self.block} does not divide image shape {self.shape}")
        if self.matrix is None:
            object.__setattr__(self, "matrix", _draw_block(self.kind, self.block, self.ratio, self.seed))
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != self.block**2:
            raise ValueError("block matrix must have block**2 columns")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def per_block(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_blocks(self) -> int:
        return (self.shape[0] // self.block) * (self.shape[1] // self.block)

    @property
    def m(self) -> int:
        return self.per_block * self.n_blocks

    @property
    def n(self) -> int:
        return self.shape[0] * self.shape[1]


def _draw_block(kind, block, ratio, seed):
    cols = block * block
    rows = _count(ratio, cols)
    rng = rng_from_seed(seed)
    if kind == "gaussian":
        phi = rng.standard_normal((rows, cols))
    else:
        phi = np.where(rng.integers(0, 2, size=(rows, cols)) == 1, 1.0, -1.0)
    return phi / np.sqrt(cols * ratio)


def make_dense(kind: str, shape, ratio: float, block: int = 8, seed: int = 0) -> DenseSensing:
    """One shared ``round(ratio * block^2) x block^2`` matrix for every block."""
    return DenseSensing(kind, tuple(int(v) for v in shape), int(block), float(ratio), int(seed))


def _to_blocks(pixels, block):
    m, n = pixels.shape
    br, bc = m // block, n // block
    # blocks in column-major grid order, each flattened column-major
    return pixels.reshape(br, block, bc, block).transpose(2, 0, 3, 1).reshape(br * bc, block * block)


def _from_blocks(cols, shape, block):
    m, n = shape
    br, bc = m // block, n // block
    return cols.reshape(bc, br, block, block).transpose(1, 3, 0, 2).reshape(m, n)


def sense_dense(img, d: DenseSensing) -> np.ndarray:
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)
    if tuple(pixels.shape) != d.shape:
        raise ValueError(f"image shape {pixels.shape} does not match sensing shape {d.shape}")
    return (_to_blocks(pixels, d.block) @ d.matrix.T).ravel()


def dense_adjoint(y, d: DenseSensing) -> Image:
    y = np.asarray(y, dtype=float)
    if y.shape != (d.m,):
        raise ValueError(f"expected {d.m} measurements, got {y.shape}")
    cols = y.reshape(d.n_blocks, d.per_block) @ d.matrix
    return Image(_from_blocks(cols, d.shape, d.block))


# ---------------------------------------------------------------------------
# Files


def write_mask(mask: SampleMask, path) -> None:
    m, n = mask.shape
    body = "".join(f"{i}\n" for i in mask.omega)
    Path(path).write_text(f"PCIMASK {m} {n} {mask.m}\n{body}")


def read_mask(path) -> SampleMask:
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "PCIMASK":
        raise ValueError(f"{path} is not a PCI mask file")
    m, n, count = (int(v) for v in head[1:])
    omega = [int(v) for v in lines[1:] if v.strip()]
    if len(omega) != count:
        raise ValueError(f"mask file lists {len(omega)} indices, header says {count}")
    return SampleMask(np.array(omega, dtype=np.int64), (m, n))


@dataclass(frozen=True)
class Measurements:
    values: np.ndarray
    shape: tuple[int, int]
    ratio: float
    seed: int
    kind: str  # pci, gaussian or bernoulli
    block: int = 0


def write_measurements(meas: Measurements, path) -> None:
    m, n = meas.shape
    header = (
        f"CSMEAS {m} {n} {meas.values.size} {meas.ratio!r} {meas.seed} {meas.kind} {meas.block}\n"
    ).encode("ascii")
    values = np.asarray(meas.values, dtype=float)
    Path(path).write_bytes(header + struct.pack(f"<{values.size}d", *values))


def read_measurements(path) -> Measurements:
    data = Path(path).read_bytes()
    end = data.index(b"\n")
    head = data[:end].decode("ascii").split()
    if len(head) != 8 or head[0] != "CSMEAS":
        raise ValueError(f"{path} is not a measurement file")
    m, n, count = int(head[1]), int(head[2]), int(head[3])
    values = np.frombuffer(data[end + 1 :], dtype="<f8").copy()
    if values.size != count:
        raise ValueError(f"measurement file holds {values.size} values, header says {count}")
    return Measurements(values, (m, n), float(head[4]), int(head[5]), head[6], int(head[7]))
