"""Built-in lifting chains: LeGall 5/3 and Daubechies db2/db4.

The Daubechies chains are derived at import time: the orthonormal lowpass
filter comes from spectral factorization, and the polyphase matrix is
factored into predict/update steps by Laurent-polynomial long division.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .lifting import Filter, LiftingChain, LiftingStage, compose_filterbank

__all__ = ["bior53", "daubechies_lowpass", "daubechies_chain", "get_chain", "WAVELETS"]

WAVELETS = ("bior53", "db2", "db4")

_EPS = 1e-11


def bior53() -> LiftingChain:
    return LiftingChain.single([0.5, 0.5], [0.25, 0.25])


def daubechies_lowpass(order: int) -> np.ndarray:
    """Orthonormal Daubechies lowpass with ``order`` vanishing moments (sum = sqrt 2)."""
    # P(y) = sum_k C(N-1+k, k) y^k with y = sin^2(w/2); keep roots inside |z| < 1
    poly = [comb(order - 1 + k, k) for k in range(order)]
    y_roots = np.roots(poly[::-1]) if order > 1 else np.array([])
    z_roots = []
    for y in y_roots:
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        z_roots.append(pair[np.argmin(np.abs(pair))])
    h = np.array([1.0])
    for _ in range(order):
        h = np.convolve(h, [1.0, 1.0])
    for r in z_roots:
        h = np.convolve(h, [1.0, -r])
    h = np.real(h)
    return h * np.sqrt(2.0) / h.sum()


# ---------------------------------------------------------------------------
# Laurent polynomials as Filter objects: taps at powers z^-n, n = start + i


def _clean(f: Filter) -> Filter:
    scale = max(1.0, float(np.max(np.abs(f.taps)))) if f.taps.size else 1.0
    taps = np.where(np.abs(f.taps) > _EPS * scale, f.taps, 0.0)
    return Filter(f.start, taps).trimmed()


def _is_zero(f: Filter) -> bool:
    return not np.any(f.taps)


def _span(f: Filter) -> int:
    return len(f.taps) - 1


def _divide(a: Filter, b: Filter) -> tuple[Filter, Filter]:
    """Quotient and remainder with ``span(rem) < span(b)``."""
    # work in powers of z^-1: a = z^-sa A(z^-1), ordinary polynomial division
    qa = np.polydiv(a.taps[::-1], b.taps[::-1])
    quot = Filter(a.start - b.start, np.atleast_1d(qa[0])[::-1])
    rem = _clean(a - b * quot)
    return _clean(quot), rem


def _polyphase(h: Filter) -> tuple[Filter, Filter]:
    """Even / odd polyphase parts with ``X(z) = He(z^2) + z^-1... `` convention.

    ``a[n] = sum_j h[j] x[2n-j]`` gives even part taps h[2i] at power i and odd
    part taps h[2i-1] at power i.
    """
    even, odd = {}, {}
    for j, v in zip(h.support, h.taps):
        if j % 2 == 0:
            even[j // 2] = v
        else:
            odd[(j + 1) // 2] = v

    def build(d):
        if not d:
            return Filter(0, [0.0])
        lo, hi = min(d), max(d)
        return Filter(lo, [d.get(i, 0.0) for i in range(lo, hi + 1)])

    return _clean(build(even)), _clean(build(odd))


def _to_predict_taps(T: Filter) -> np.ndarray:
    """Even-length ``t`` with ``predict_polynomial(t) == T`` (zero padded)."""
    lo, hi = T.start, T.start + len(T.taps) - 1
    half = max(-lo, hi + 1, 1)
    t = np.zeros(2 * half)
    for n, v in zip(T.support, T.taps):
        t[half - 1 - n] = v
    return t


def _to_update_taps(S: Filter) -> np.ndarray:
    lo, hi = S.start, S.start + len(S.taps) - 1
    half = max(1 - lo, hi, 1)
    s = np.zeros(2 * half)
    for n, v in zip(S.support, S.taps):
        s[n + half - 1] = v
    return s


def _factor(h0: Filter, h1: Filter):
    """Factor the analysis bank into lifting steps, or return None."""
    e0, o0 = _polyphase(h0)
    e1, o1 = _polyphase(h1)
    steps = []
    for _ in range(64):
        if _is_zero(o0):
            break
        if _is_zero(e0):
            return None
        if _span(e0) >= _span(o0):
            q, r = _divide(e0, o0)
            # predict step with T = -q: columns e += o * T
            T = -q
            e0 = r
            e1 = _clean(e1 + o1 * T)
            steps.append(("predict", T))
        else:
            q, r = _divide(o0, e0)
            S = q
            o0 = r
            o1 = _clean(o1 - e1 * S)
            steps.append(("update", S))
    else:
        return None
    if _span(e0) != 0 or e0.start != 0 or _span(o1) != 0 or o1.start != 0:
        return None
    ka, kd = float(e0.taps[0]), float(o1.taps[0])
    if not _is_zero(e1):
        steps.append(("predict", _clean(Filter(e1.start, -e1.taps / kd))))
    return steps, ka, kd


def _steps_to_chain(steps, ka, kd) -> LiftingChain:
    # steps were peeled from the right, so they are already in application order
    stages = []
    pending_t = None
    for kind, poly in steps:
        if kind == "predict":
            if pending_t is not None:
                stages.append(LiftingStage(pending_t, [0.0, 0.0]))
            pending_t = _to_predict_taps(poly)
        else:
            t = pending_t if pending_t is not None else np.zeros(2)
            stages.append(LiftingStage(t, _to_update_taps(poly)))
            pending_t = None
    if pending_t is not None:
        stages.append(LiftingStage(pending_t, [0.0, 0.0]))
    return LiftingChain(tuple(stages), approx_gain=ka, detail_gain=kd)


@lru_cache(maxsize=None)
def daubechies_chain(order: int) -> LiftingChain:
    """Orthonormal ``db<order>`` as a lifting chain (analysis lowpass sums to sqrt 2)."""
    h = daubechies_lowpass(order)
    length = len(h)
    for shift in range(-length, length + 1):
        h0 = Filter(shift, h)
        for offset in range(-length - 1, length + 2, 2):
            # quadrature mirror: h1[n] = (-1)^n h0[offset - n]
            n = np.arange(offset - (shift + length - 1), offset - shift + 1)
            taps = np.array([(-1) ** int(k) * h[offset - k - shift] for k in n])
            h1 = Filter(int(n[0]), taps)
            found = _factor(h0, h1)
            if found is None:
                continue
            chain = _steps_to_chain(*found)
            bank = compose_filterbank(chain)
            if _same(bank.h0, h0) and _same(bank.h1, h1):
                return chain
    raise RuntimeError(f"could not factor db{order} into lifting steps")


def _same(a: Filter, b: Filter, tol=1e-9) -> bool:
    a, b = _clean(a), _clean(b)
    return a.start == b.start and len(a.taps) == len(b.taps) and np.allclose(a.taps, b.taps, atol=tol)


def get_chain(name: str) -> LiftingChain:
    if name == "bior53":
        return bior53()
    if name in ("db2", "db4"):
        return daubechies_chain(int(name[2:]))
    raise ValueError(f"unknown wavelet {name!r}; expected one of {WAVELETS}")
