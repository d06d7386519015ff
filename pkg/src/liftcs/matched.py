"""Signal-matched lifting wavelets designed from a coarse CS estimate.

The pipeline has three stages:

1. ``coarse_estimate``: basis pursuit with the LeGall 5/3 wavelet.
2. ``design_matched``: per scan direction, least-squares fits of the predict
   filter ``t`` (against a 5/3 reference detail) and of the update filter
   ``s`` (so that the lowpass branch alone best resynthesizes the signal).
3. ``reconstruct_matched``: basis pursuit again, now with the fitted chains.

Least-squares rows only use interior samples whose values never touch the
symmetric boundary extension. For scan signals they also stay inside one
scan line, because the 2-D transform filters each line on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bpsolver import SolverConfig, SolveReport, build_operator, solve_bp
from .imaging import Image, ScanSignal, scan
from .lifting import (
    LAZY,
    Filterbank,
    LiftingChain,
    LiftingStage,
    apply_predict,
    apply_update,
    compose_filterbank,
    compose_predict,
    compose_update,
    filterbank_from_csv,
    filterbank_to_csv,
    forward_1d,
    lazy_split,
)
from .pyramid import DecompositionPlan, SynthesisOperator
from .standard import bior53

__all__ = [
    "MatchedDesign",
    "StageSignals",
    "coarse_estimate",
    "reference_detail",
    "predict_rows",
    "predict_system",
    "fit_predict",
    "update_rows",
    "update_reach",
    "update_system",
    "update_objective",
    "fit_update",
    "design_chain",
    "design_matched",
    "reconstruct_matched",
    "write_design",
    "read_design",
    "REFERENCES",
]

REFERENCES = ("normalized", "unnormalized")

# relative singular-value cutoff below which a fit is treated as rank deficient
RANK_TOL = 1e-10


def centered(taps, length: int) -> np.ndarray:
    """Zero-pad an even-length filter symmetrically to ``length``."""
    taps = np.asarray(taps, dtype=float)
    pad = (length - taps.size) // 2
    return np.pad(taps, (pad, pad))


def _lstsq(mat, rhs):
    """Minimum-norm least squares; ``None`` when ``mat`` is rank deficient."""
    if mat.shape[0] < mat.shape[1]:
        return None
    sol, _, rank, sv = np.linalg.lstsq(mat, rhs, rcond=RANK_TOL)
    if rank < mat.shape[1] or sv[0] == 0.0:
        return None
    return sol


# ---------------------------------------------------------------------------
# Stage 1


def coarse_estimate(y, sensing, levels: int = 3, strategy: str = "l-pyramid",
                    l_rule: str = "recursive", cfg: SolverConfig | None = None):
    """Basis-pursuit reconstruction with the 5/3 wavelet; returns ``(Image, SolveReport)``."""
    plan = DecompositionPlan.uniform(bior53(), levels=levels, strategy=strategy, l_rule=l_rule)
    shape = tuple(sensing.shape)
    s, report = solve_bp(build_operator(sensing, plan, shape), y, cfg)
    return Image(SynthesisOperator(plan, shape).apply(s)), report


# ---------------------------------------------------------------------------
# Stage 2: predict


def reference_detail(x, reference: str = "normalized") -> np.ndarray:
    """Single-level 5/3 detail of ``x``.

    ``"unnormalized"`` is ``x[2n+1] - (x[2n] + x[2n+2]) / 2``; ``"normalized"``
    scales it by ``1/sqrt(2)``, the unit-gain convention of most toolboxes.
    """
    if reference not in REFERENCES:
        raise ValueError(f"reference must be one of {REFERENCES}")
    _, d = forward_1d(np.asarray(x, dtype=float), bior53())
    return d / np.sqrt(2.0) if reference == "normalized" else d


def _within(lo, hi, n_full, line):
    ok = (lo >= 0) & (hi < n_full)
    if line:
        ok &= (lo // line) == (hi // line)
    return ok


def predict_rows(n_full: int, lt: int, line: int | None = None, reach: int = 0) -> np.ndarray:
    """Detail indices whose prediction uses no extended samples.

    Row ``n`` predicts ``x[2n+1]`` from ``x[2n-Lt+2] .. x[2n+Lt]``. With
    ``line`` set, rows whose stencil crosses a scan-line boundary are also
    dropped; ``reach`` widens the stencil for later lifting stages.
    """
    n = np.arange(n_full // 2)
    ok = _within(2 * n - lt + 2 - reach, 2 * n + lt + reach, n_full, line)
    return n[ok]


def predict_system(even, odd, lt: int, rows):
    """Columns ``C[r, k] = x[2n - Lt + 2 + 2k]`` (as even-stream samples) and target ``odd``."""
    even = np.asarray(even, dtype=float)
    rows = np.asarray(rows)
    idx = rows[:, None] - lt // 2 + 1 + np.arange(lt)[None, :]
    return even[idx], np.asarray(odd, dtype=float)[rows]


def _check_even(value, name):
    if value < 2 or value % 2:
        raise ValueError(f"{name} must be an even integer >= 2, got {value}")


def _line_length(x):
    if isinstance(x, ScanSignal):
        m, n = x.origin_shape
        return m if x.axis == "column" else n
    return None


def _values(x):
    return x.values if isinstance(x, ScanSignal) else np.asarray(x, dtype=float)


def fit_predict(x, lt: int = 2, dref=None, *, even=None, odd=None, reach: int = 0) -> np.ndarray:
    """Fit ``t`` minimizing ``||(x_o - C t) - dref||`` over interior rows.

    ``x`` is the signal (a :class:`ScanSignal` or array). Later lifting stages
    pass their own ``even``/``odd`` streams instead of splitting ``x``. With
    ``dref`` omitted the target is zero detail.
    """
    _check_even(lt, "Lt")
    values = _values(x)
    if values.size < 2 * lt:
        raise ValueError(f"signal of length {values.size} is too short for Lt={lt}")
    if even is None:
        even, odd = lazy_split(values)
    rows = predict_rows(values.size, lt, _line_length(x), reach)
    cols, target = predict_system(even, odd, lt, rows)
    if dref is not None:
        target = target - np.asarray(dref, dtype=float)[rows]
    t = _lstsq(cols, target) if rows.size else None
    return centered([0.5, 0.5], lt) if t is None else t


# ---------------------------------------------------------------------------
# Stage 2: update


def update_reach(f0, lt: int, ls: int, reach: int = 0) -> int:
    """Half-width of the input span that one resynthesized sample depends on."""
    f0_reach = max(abs(f0.start), abs(f0.start + len(f0.taps) - 1))
    return f0_reach + 2 * (lt + ls) + reach + 2


def update_rows(n_full: int, reach: int, line: int | None = None) -> np.ndarray:
    n = np.arange(n_full)
    return n[_within(n - reach, n + reach, n_full, line)]


def _synth_lowpass(a, f0, n_full):
    """``sum_k a[k] f0[n - 2k]`` for ``n = 0 .. n_full-1`` (zero outside ``a``)."""
    up = np.zeros(2 * len(a))
    up[::2] = a
    full = np.convolve(up, f0.taps)
    # full[i] holds output index i + f0.start
    out = np.zeros(n_full)
    src = np.arange(n_full) - f0.start
    ok = (src >= 0) & (src < full.size)
    out[ok] = full[src[ok]]
    return out


def update_system(even, detail, ls: int, f0, signal, rows):
    """Affine model ``x1 = c0 + C s`` restricted to ``rows``; returns ``(C, target)``.

    ``target = signal - c0`` so the fit is ``min ||C s - target||``.
    """
    n_full = len(signal)
    c0 = _synth_lowpass(np.asarray(even, dtype=float), f0, n_full)
    cols = []
    for i in range(ls):
        e = np.zeros(ls)
        e[i] = 1.0
        u = apply_update(np.zeros(len(even)), detail, e)
        cols.append(_synth_lowpass(u, f0, n_full)[rows])
    return np.column_stack(cols), np.asarray(signal, dtype=float)[rows] - c0[rows]


def fit_update(x, t, ls: int = 2, f0new=None, *, even=None, detail=None,
               reach: int | None = None) -> np.ndarray:
    """Fit ``s`` so the upsampled, lowpass-synthesized approximation matches ``x``.

    ``f0new`` defaults to the synthesis lowpass after the predict step with
    ``t``. Rows are the samples whose model never touches extended samples
    (or, for a :class:`ScanSignal`, another scan line).
    """
    _check_even(ls, "Ls")
    values = _values(x)
    t = np.asarray(t, dtype=float)
    if even is None:
        even, odd = lazy_split(values)
        detail = apply_predict(even, odd, t)
    if f0new is None:
        f0new = compose_predict(LAZY, t).f0
    if reach is None:
        reach = update_reach(f0new, len(t), ls)
    rows = update_rows(values.size, reach, _line_length(x))
    fallback = centered([0.25, 0.25], ls)
    if rows.size < ls or not np.any(np.asarray(detail)):
        return fallback
    cols, target = update_system(even, detail, ls, f0new, values, rows)
    s = _lstsq(cols, target)
    return fallback if s is None else s


def update_objective(x, t, s, f0new=None, reach: int | None = None) -> float:
    """Squared resynthesis error of the lowpass branch over the fit rows."""
    values = _values(x)
    t = np.asarray(t, dtype=float)
    even, odd = lazy_split(values)
    detail = apply_predict(even, odd, t)
    a = apply_update(even, detail, s)
    if f0new is None:
        f0new = compose_predict(LAZY, t).f0
    if reach is None:
        reach = update_reach(f0new, len(t), len(s))
    rows = update_rows(values.size, reach, _line_length(x))
    err = _synth_lowpass(a, f0new, values.size) - values
    return float(np.sum(err[rows] ** 2))


# ---------------------------------------------------------------------------
# Designs


@dataclass(frozen=True)
class StageSignals:
    """Intermediate signals of one predict/update fit."""

    signal: np.ndarray
    predicted_detail: np.ndarray
    reference_detail: np.ndarray
    approx: np.ndarray
    upsampled: np.ndarray
    synthesized: np.ndarray


@dataclass(frozen=True)
class MatchedDesign:
    col_chain: LiftingChain
    row_chain: LiftingChain
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def col_filterbank(self) -> Filterbank:
        return compose_filterbank(self.col_chain)

    @property
    def row_filterbank(self) -> Filterbank:
        return compose_filterbank(self.row_chain)

    def plan(self, levels: int = 3, strategy: str = "l-pyramid", l_rule: str = "recursive"):
        return DecompositionPlan(self.col_chain, self.row_chain, levels, strategy, l_rule)


def design_chain(signal, lt: int = 2, ls: int = 2, stages: int = 1,
                 reference: str = "normalized", trace: list | None = None) -> LiftingChain:
    """Fit a ``stages``-deep lifting chain to a 1-D signal.

    Stage ``j`` treats the approximation and detail of stage ``j-1`` as its
    even and odd streams; its update is fitted through the synthesis lowpass
    of the whole chain so far.
    """
    _check_even(lt, "Lt")
    _check_even(ls, "Ls")
    if stages < 1:
        raise ValueError("stages must be >= 1")
    values = _values(signal)
    if values.size < 2 * lt:
        raise ValueError(f"signal of length {values.size} is too short for Lt={lt}")
    dref = reference_detail(values, reference)
    even, odd = lazy_split(values)
    bank = LAZY
    out = []
    reach = 0
    for _ in range(stages):
        t = fit_predict(signal, lt, dref, even=even, odd=odd, reach=reach)
        detail = apply_predict(even, odd, t)
        bank = compose_predict(bank, t)
        stage_reach = update_reach(bank.f0, lt, ls, reach)
        s = fit_update(signal, t, ls, bank.f0, even=even, detail=detail, reach=stage_reach)
        approx = apply_update(even, detail, s)
        if trace is not None:
            up = np.zeros(2 * len(approx))
            up[::2] = approx
            trace.append(StageSignals(values, detail, dref, approx, up[: values.size],
                                      _synth_lowpass(approx, bank.f0, values.size)))
        bank = compose_update(bank, s)
        out.append(LiftingStage(t, s))
        even, odd = approx, detail
        reach = stage_reach
    return LiftingChain(tuple(out))


def design_matched(img, lt: int = 2, ls: int = 2, stages: int = 1,
                   reference: str = "normalized", meta: dict | None = None) -> MatchedDesign:
    """Matched chains for the column and row directions of ``img``.

    Each direction is fitted on the serpentine (strategy 2) scan of the
    whole image along that direction.
    """
    col = design_chain(scan(img, "column", 2), lt, ls, stages, reference)
    row = design_chain(scan(img, "row", 2), lt, ls, stages, reference)
    info = {"Lt": lt, "Ls": ls, "stages": stages, "reference": reference}
    info.update(meta or {})
    return MatchedDesign(col, row, info)


def reconstruct_matched(y, sensing, design: MatchedDesign, levels: int = 3,
                        strategy: str = "l-pyramid", l_rule: str = "recursive",
                        cfg: SolverConfig | None = None) -> tuple[Image, SolveReport]:
    plan = design.plan(levels, strategy, l_rule)
    shape = tuple(sensing.shape)
    s, report = solve_bp(build_operator(sensing, plan, shape), y, cfg)
    return Image(SynthesisOperator(plan, shape).apply(s)), report


# ---------------------------------------------------------------------------
# Text format


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def write_design(design: MatchedDesign, path=None) -> str:
    lines = ["MATCHEDDESIGN 1"]
    lines.append("meta: " + " ".join(f"{k}={v}" for k, v in design.meta.items()))
    for name, chain in (("column", design.col_chain), ("row", design.row_chain)):
        lines.append(f"direction: {name}")
        lines.append(f"gains: {chain.approx_gain!r} {chain.detail_gain!r}")
        for stage in chain.stages:
            lines.append("predict: " + _fmt(stage.predict))
            lines.append("update: " + _fmt(stage.update))
        lines.append(filterbank_to_csv(compose_filterbank(chain), prefix=name[:3] + "_").rstrip("\n"))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse_meta(text):
    meta = {}
    for item in text.split():
        key, _, value = item.partition("=")
        for cast in (int, float):
            try:
                value = cast(value)
                break
            except ValueError:
                continue
        meta[key] = value
    return meta


def read_design(source) -> MatchedDesign:
    """Parse :func:`write_design` output from a path or a string."""
    text = source if isinstance(source, str) and source.startswith("MATCHEDDESIGN") else Path(source).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("MATCHEDDESIGN"):
        raise ValueError("not a matched design file")
    meta, chains, current = {}, {}, None
    for line in lines[1:]:
        if line.startswith("meta:"):
            meta = _parse_meta(line[5:])
        elif line.startswith("direction:"):
            current = line.split(":", 1)[1].strip()
            chains[current] = {"gains": (1.0, 1.0), "t": [], "s": [], "csv": []}
        elif line.startswith("gains:"):
            ka, kd = (float(v) for v in line[6:].split())
            chains[current]["gains"] = (ka, kd)
        elif line.startswith("predict:"):
            chains[current]["t"].append([float(v) for v in line[8:].split()])
        elif line.startswith("update:"):
            chains[current]["s"].append([float(v) for v in line[7:].split()])
        elif line.strip():
            chains[current]["csv"].append(line)
    built = {}
    for name in ("column", "row"):
        if name not in chains:
            raise ValueError(f"design file lacks the {name} direction")
        c = chains[name]
        stages = tuple(LiftingStage(t, s) for t, s in zip(c["t"], c["s"]))
        chain = LiftingChain(stages, *c["gains"])
        stored = filterbank_from_csv(c["csv"])
        bank = compose_filterbank(chain)
        for key, filt in bank.items():
            got = stored.get(name[:3] + "_" + key)
            if got is not None and not np.allclose(got.trimmed().taps, filt.trimmed().taps, atol=1e-12):
                raise ValueError(f"stored {name} {key} disagrees with its lifting steps")
        built[name] = chain
    return MatchedDesign(built["column"], built["row"], meta)
