"""One-dimensional lifting engine.

A signal is split into even and odd samples (the Lazy wavelet), then each
:class:`LiftingStage` predicts the odd samples from their even neighbours and
updates the even samples with the resulting detail. Every elementary step is
a sparse linear map, so the forward, inverse and transposed transforms share
the same cached matrices.

Boundary handling is whole-sample symmetric extension of the full-rate
signal: ``x[-i] = x[i]`` and ``x[N-1+i] = x[N-1-i]``. Reflection preserves
index parity, so even samples always extend from even samples and details
from details.

All transforms act along axis 0 and broadcast over any trailing axes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LiftingStage",
    "LiftingChain",
    "Filter",
    "Filterbank",
    "lazy_split",
    "lazy_merge",
    "apply_predict",
    "apply_update",
    "forward_1d",
    "inverse_1d",
    "transpose_inverse_1d",
    "compose_filterbank",
    "filterbank_to_csv",
    "reflect_index",
]


def _as_taps(values, name):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size < 2 or arr.size % 2:
        raise ValueError(f"{name} filter must have even length >= 2, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} filter has non-finite taps")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LiftingStage:
    """A predict filter ``t`` followed by an update filter ``s``.

    The predict step computes ``p[n] = sum_k t[k] x[2n - Lt + 2 + 2k]``, i.e.
    the ``Lt`` even samples nearest to ``x[2n+1]``. The update step computes
    ``a[n] = x_e[n] + sum_i s[i] d[n + Ls/2 - 1 - i]``.
    """

    predict: np.ndarray
    update: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "predict", _as_taps(self.predict, "predict"))
        object.__setattr__(self, "update", _as_taps(self.update, "update"))

    def __eq__(self, other):
        if not isinstance(other, LiftingStage):
            return NotImplemented
        return np.array_equal(self.predict, other.predict) and np.array_equal(
            self.update, other.update
        )

    def __hash__(self):
        return hash((self.predict.tobytes(), self.update.tobytes()))


@dataclass(frozen=True)
class LiftingChain:
    """Ordered lifting stages plus optional output gains.

    ``approx_gain`` and ``detail_gain`` scale the two output channels after the
    last stage. Matched and 5/3 chains keep both at 1; they exist so that
    orthonormal factorizations (Daubechies) fit the same machinery.
    """

    stages: tuple[LiftingStage, ...]
    approx_gain: float = 1.0
    detail_gain: float = 1.0

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("a lifting chain needs at least one stage")
        object.__setattr__(self, "stages", stages)
        if self.approx_gain == 0 or self.detail_gain == 0:
            raise ValueError("channel gains must be non-zero")

    @classmethod
    def single(cls, predict, update) -> "LiftingChain":
        return cls((LiftingStage(predict, update),))

    def __len__(self):
        return len(self.stages)


# ---------------------------------------------------------------------------
# Split / merge


def lazy_split(x):
    """Split along axis 0 into ``(x[0::2], x[1::2])``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("signal must have at least 2 samples")
    return x[0::2].copy(), x[1::2].copy()


def lazy_merge(even, odd):
    """Interleave ``even`` and ``odd`` along axis 0."""
    even = np.asarray(even, dtype=float)
    odd = np.asarray(odd, dtype=float)
    ne, no = even.shape[0], odd.shape[0]
    if ne not in (no, no + 1) or even.shape[1:] != odd.shape[1:]:
        raise ValueError(f"incompatible lengths for merge: {ne} even, {no} odd")
    out = np.empty((ne + no,) + even.shape[1:])
    out[0::2] = even
    out[1::2] = odd
    return out


def reflect_index(j, length):
    """Whole-sample symmetric reflection of index array ``j`` into ``[0, length)``."""
    j = np.asarray(j)
    if length == 1:
        return np.zeros_like(j)
    period = 2 * (length - 1)
    j = np.mod(j, period)
    return np.where(j >= length, period - j, j)


# ---------------------------------------------------------------------------
# Elementary step matrices


@lru_cache(maxsize=512)
def _predict_matrix(n_full: int, taps: tuple) -> sp.csr_matrix:
    """Sparse (n_odd x n_even) map even -> prediction of odd samples."""
    lt = len(taps)
    ne, no = (n_full + 1) // 2, n_full // 2
    n = np.arange(no)[:, None]
    k = np.arange(lt)[None, :]
    pos = reflect_index(2 * n - lt + 2 + 2 * k, n_full)
    rows = np.broadcast_to(n, pos.shape).ravel()
    vals = np.broadcast_to(np.asarray(taps), pos.shape).ravel()
    mat = sp.csr_matrix((vals, (rows, pos.ravel() // 2)), shape=(no, ne))
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=512)
def _update_matrix(n_full: int, taps: tuple) -> sp.csr_matrix:
    """Sparse (n_even x n_odd) map detail -> update of even samples."""
    ls = len(taps)
    ne, no = (n_full + 1) // 2, n_full // 2
    n = np.arange(ne)[:, None]
    i = np.arange(ls)[None, :]
    # detail d[m] lives at full-rate position 2m+1
    pos = reflect_index(2 * (n + ls // 2 - 1 - i) + 1, n_full)
    rows = np.broadcast_to(n, pos.shape).ravel()
    vals = np.broadcast_to(np.asarray(taps), pos.shape).ravel()
    mat = sp.csr_matrix((vals, (rows, (pos.ravel() - 1) // 2)), shape=(ne, no))
    mat.sum_duplicates()
    return mat


def _apply(mat, x):
    if x.ndim == 1:
        return mat @ x
    flat = x.reshape(x.shape[0], -1)
    return np.asarray(mat @ flat).reshape((mat.shape[0],) + x.shape[1:])


def _key(taps):
    return tuple(float(v) for v in np.asarray(taps).ravel())


def apply_predict(even, odd, t):
    """Return the detail ``odd - P_t(even)``."""
    even = np.asarray(even, dtype=float)
    odd = np.asarray(odd, dtype=float)
    t = _as_taps(t, "predict")
    mat = _predict_matrix(even.shape[0] + odd.shape[0], _key(t))
    return odd - _apply(mat, even)


def apply_update(even, detail, s):
    """Return the approximation ``even + U_s(detail)``."""
    even = np.asarray(even, dtype=float)
    detail = np.asarray(detail, dtype=float)
    s = _as_taps(s, "update")
    mat = _update_matrix(even.shape[0] + detail.shape[0], _key(s))
    return even + _apply(mat, detail)


# ---------------------------------------------------------------------------
# Full single-level transforms


def _stage_mats(n_full, stage):
    return (
        _predict_matrix(n_full, _key(stage.predict)),
        _update_matrix(n_full, _key(stage.update)),
    )


def forward_1d(x, chain: LiftingChain):
    """Single-level analysis: split, then predict/update for every stage."""
    x = np.asarray(x, dtype=float)
    a, d = lazy_split(x)
    n_full = x.shape[0]
    for stage in chain.stages:
        pm, um = _stage_mats(n_full, stage)
        d = d - _apply(pm, a)
        a = a + _apply(um, d)
    return a * chain.approx_gain, d * chain.detail_gain


def _check_pair(approx, detail):
    approx = np.asarray(approx, dtype=float)
    detail = np.asarray(detail, dtype=float)
    if approx.shape[0] not in (detail.shape[0], detail.shape[0] + 1):
        raise ValueError(
            f"approx/detail lengths {approx.shape[0]}/{detail.shape[0]} "
            "do not come from one split"
        )
    return approx, detail


def inverse_1d(approx, detail, chain: LiftingChain):
    """Exact inverse of :func:`forward_1d`."""
    a, d = _check_pair(approx, detail)
    a = a / chain.approx_gain
    d = d / chain.detail_gain
    n_full = a.shape[0] + d.shape[0]
    for stage in reversed(chain.stages):
        pm, um = _stage_mats(n_full, stage)
        a = a - _apply(um, d)
        d = d + _apply(pm, a)
    return lazy_merge(a, d)


def transpose_inverse_1d(x, chain: LiftingChain):
    """Linear-algebra transpose of :func:`inverse_1d`.

    Maps a full-rate signal to an ``(approx, detail)`` pair such that
    ``<inverse_1d(a, d), x> == <a, a_adj> + <d, d_adj>``.
    """
    x = np.asarray(x, dtype=float)
    a, d = lazy_split(x)
    n_full = x.shape[0]
    for stage in chain.stages:
        pm, um = _stage_mats(n_full, stage)
        a = a + _apply(pm.T, d)
        d = d - _apply(um.T, a)
    return a / chain.approx_gain, d / chain.detail_gain


# ---------------------------------------------------------------------------
# Equivalent filterbank


@dataclass(frozen=True)
class Filter:
    """FIR filter ``h[start], h[start+1], ...`` with z-transform ``sum h[n] z^-n``."""

    start: int
    taps: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=float))

    def __mul__(self, other: "Filter") -> "Filter":
        return Filter(self.start + other.start, np.convolve(self.taps, other.taps))

    def __add__(self, other: "Filter") -> "Filter":
        lo = min(self.start, other.start)
        hi = max(self.start + len(self.taps), other.start + len(other.taps))
        out = np.zeros(hi - lo)
        out[self.start - lo : self.start - lo + len(self.taps)] += self.taps
        out[other.start - lo : other.start - lo + len(other.taps)] += other.taps
        return Filter(lo, out)

    def __neg__(self):
        return Filter(self.start, -self.taps)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, gain) -> "Filter":
        return Filter(self.start, self.taps * gain)

    def upsampled(self) -> "Filter":
        """``H(z^2)``."""
        out = np.zeros(2 * len(self.taps) - 1)
        out[::2] = self.taps
        return Filter(2 * self.start, out)

    def trimmed(self, tol=0.0) -> "Filter":
        nz = np.flatnonzero(np.abs(self.taps) > tol)
        if nz.size == 0:
            return Filter(0, np.zeros(1))
        return Filter(self.start + int(nz[0]), self.taps[nz[0] : nz[-1] + 1])

    @property
    def support(self) -> range:
        return range(self.start, self.start + len(self.taps))

    def __eq__(self, other):
        if not isinstance(other, Filter):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.taps, other.taps)

    __hash__ = None


@dataclass(frozen=True)
class Filterbank:
    h0: Filter
    h1: Filter
    f0: Filter
    f1: Filter

    def items(self):
        return (("h0", self.h0), ("h1", self.h1), ("f0", self.f0), ("f1", self.f1))


def predict_polynomial(t) -> Filter:
    """``T(z) = z^-(Lt/2-1) sum_i t[i] z^i`` as a tap array."""
    t = np.asarray(t, dtype=float)
    return Filter(-(len(t) // 2), t[::-1])


def update_polynomial(s) -> Filter:
    """``S(z) = z^(Ls/2-1) sum_i s[i] z^-i`` as a tap array."""
    s = np.asarray(s, dtype=float)
    return Filter(1 - len(s) // 2, s)


LAZY = Filterbank(
    h0=Filter(0, [1.0]),
    h1=Filter(-1, [1.0]),
    f0=Filter(0, [1.0]),
    f1=Filter(1, [1.0]),
)


def compose_predict(bank: Filterbank, t) -> Filterbank:
    t2 = predict_polynomial(t).upsampled()
    return Filterbank(
        h0=bank.h0,
        h1=(bank.h1 - bank.h0 * t2).trimmed(),
        f0=(bank.f0 + bank.f1 * t2).trimmed(),
        f1=bank.f1,
    )


def compose_update(bank: Filterbank, s) -> Filterbank:
    # uses the already-predicted H1 and F0 of ``bank``
    s2 = update_polynomial(s).upsampled()
    return Filterbank(
        h0=(bank.h0 + bank.h1 * s2).trimmed(),
        h1=bank.h1,
        f0=bank.f0,
        f1=(bank.f1 - bank.f0 * s2).trimmed(),
    )


def compose_filterbank(chain: LiftingChain) -> Filterbank:
    """Four-filter bank equivalent to ``chain``, starting from the Lazy wavelet.

    Analysis follows ``a[n] = sum_j h0[j] x[2n-j]`` and
    ``d[n] = sum_j h1[j] x[2n-j]``.
    """
    bank = LAZY
    for stage in chain.stages:
        bank = compose_predict(bank, stage.predict)
        bank = compose_update(bank, stage.update)
    ka, kd = chain.approx_gain, chain.detail_gain
    return Filterbank(
        h0=bank.h0.scaled(ka),
        h1=bank.h1.scaled(kd),
        f0=bank.f0.scaled(1.0 / ka),
        f1=bank.f1.scaled(1.0 / kd),
    )


def filterbank_to_csv(bank: Filterbank, prefix: str = "") -> str:
    """CSV rows ``name,support_start,tap0,tap1,...``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for name, filt in bank.items():
        writer.writerow([prefix + name, filt.start, *(repr(float(v)) for v in filt.taps)])
    return buf.getvalue()


def filterbank_from_csv(rows: Sequence[str]) -> dict[str, Filter]:
    out = {}
    for row in csv.reader(rows):
        if not row:
            continue
        out[row[0]] = Filter(int(row[1]), [float(v) for v in row[2:]])
    return out
