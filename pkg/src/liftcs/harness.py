"""Experiment sweeps over images, ratios, sensing matrices and wavelets."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bpsolver import SolverConfig, build_operator, solve_bp
from .imaging import Image, load_image
from .matched import coarse_estimate, design_matched, reconstruct_matched
from .metrics import format_psnr, psnr
from .pyramid import DecompositionPlan, SynthesisOperator
from .sensing import make_dense, make_pci, sense_dense, sense_pci
from .standard import get_chain

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "HEADER",
    "MATRICES",
    "WAVELETS",
    "make_sensing",
    "measure",
    "run_trial",
    "run_experiment",
    "aggregate",
    "format_rows",
    "parse_config",
]

log = logging.getLogger(__name__)

HEADER = (
    "image", "ratio", "matrix", "wavelet", "strategy", "levels", "trial",
    "iterations", "residual", "seconds", "psnr_db", "psnr_std", "seconds_std",
)
MATRICES = ("pci", "gaussian", "bernoulli")
WAVELETS = ("db2", "db4", "bior53", "matched")


@dataclass(frozen=True)
class ExperimentConfig:
    images: tuple = ()
    ratios: tuple = (0.5,)
    matrices: tuple = ("pci",)
    wavelets: tuple = ("bior53",)
    strategy: str = "l-pyramid"
    l_rule: str = "recursive"
    levels: int = 3
    trials: int = 10
    seed: int = 0
    block: int = 8
    output: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        for name in ("images", "ratios", "matrices", "wavelets"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        for r in self.ratios:
            if not 0.0 < float(r) <= 1.0:
                raise ValueError(f"ratio {r} outside (0, 1]")
        bad = set(self.matrices) - set(MATRICES)
        if bad:
            raise ValueError(f"unknown matrices {sorted(bad)}")
        bad = set(self.wavelets) - set(WAVELETS)
        if bad:
            raise ValueError(f"unknown wavelets {sorted(bad)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    image: str
    ratio: float
    matrix: str
    wavelet: str
    strategy: str
    levels: int
    trial: int
    iterations: int
    residual: float
    seconds: float
    psnr_db: float
    coarse_psnr_db: float = math.nan
    converged: bool = True
    error: str = ""


def make_sensing(matrix: str, shape, ratio: float, seed: int, block: int = 8):
    if matrix == "pci":
        return make_pci(shape, ratio, seed)
    return make_dense(matrix, shape, ratio, block, seed)


def measure(img, sensing) -> np.ndarray:
    if hasattr(sensing, "omega"):
        return sense_pci(img, sensing)
    return sense_dense(img, sensing)


def _standard(y, sensing, wavelet, levels, strategy, l_rule, cfg):
    plan = DecompositionPlan.uniform(get_chain(wavelet), levels=levels, strategy=strategy, l_rule=l_rule)
    shape = tuple(sensing.shape)
    s, report = solve_bp(build_operator(sensing, plan, shape), y, cfg)
    return Image(SynthesisOperator(plan, shape).apply(s)), report


def run_trial(img: Image, name: str, ratio: float, matrix: str, wavelet: str, trial: int,
              cfg: ExperimentConfig, cache: dict | None = None) -> TrialResult:
    """Sense ``img`` with seed ``cfg.seed + trial`` and reconstruct with ``wavelet``.

    ``seconds`` covers solver time only; for the matched pipeline it is the
    sum of the coarse and final solves. ``cache`` lets the matched pipeline
    reuse a 5/3 reconstruction of the same measurements.
    """
    seed = cfg.seed + trial
    sensing = make_sensing(matrix, img.shape, ratio, seed, cfg.block)
    y = measure(img, sensing)
    common = dict(levels=cfg.levels, strategy=cfg.strategy, l_rule=cfg.l_rule, cfg=cfg.solver)
    key = (name, ratio, matrix, trial)
    coarse_db = math.nan
    if wavelet == "matched":
        if cache is not None and key in cache:
            coarse, coarse_rep = cache[key]
        else:
            coarse, coarse_rep = coarse_estimate(y, sensing, **common)
        coarse_db = psnr(img, coarse).psnr_db
        design = design_matched(coarse, meta={"ratio": ratio, "seed": seed})
        rec, rep = reconstruct_matched(y, sensing, design, **common)
        seconds = rep.seconds + coarse_rep.seconds
    else:
        rec, rep = _standard(y, sensing, wavelet, **common)
        seconds = rep.seconds
        if wavelet == "bior53" and cache is not None:
            cache[key] = (rec, rep)
    return TrialResult(
        name, ratio, matrix, wavelet, cfg.strategy, cfg.levels, trial,
        rep.iterations, rep.residual, seconds, psnr(img, rec).psnr_db, coarse_db, rep.converged,
    )


def aggregate(rows) -> dict:
    """Mean and population standard deviation of PSNR and seconds.

    Statistics use the values as printed in trial rows (PSNR to 2 decimals,
    seconds to 4) so that they can be recomputed exactly from the CSV.
    """
    good = [r for r in rows if not r.error]
    if not good:
        nan = math.nan
        return {"iterations": nan, "residual": nan, "seconds": nan, "psnr_db": nan,
                "psnr_std": nan, "seconds_std": nan}
    p = np.array([round(r.psnr_db, 2) if math.isfinite(r.psnr_db) else r.psnr_db for r in good])
    s = np.array([round(r.seconds, 4) for r in good])
    return {
        "iterations": float(np.mean([r.iterations for r in good])),
        "residual": float(np.mean([r.residual for r in good])),
        "seconds": float(s.mean()),
        "psnr_db": float(p.mean()) if np.all(np.isfinite(p)) else math.inf,
        "psnr_std": float(p.std()) if np.all(np.isfinite(p)) else 0.0,
        "seconds_std": float(s.std()),
    }


def _num(v, digits=None):
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if digits is None:
        return repr(float(v)) if isinstance(v, float) else str(v)
    return f"{v:.{digits}f}"


def format_rows(results, trials: int) -> list[list[str]]:
    """Trial rows, each cell followed by one aggregate row (``trial == "agg"``)."""
    out = []
    for i in range(0, len(results), trials):
        cell = results[i : i + trials]
        for r in cell:
            out.append([
                r.image, repr(r.ratio), r.matrix, r.wavelet, r.strategy, str(r.levels), str(r.trial),
                str(r.iterations), _num(r.residual), _num(r.seconds, 4),
                "nan" if r.error else format_psnr(r.psnr_db), "", "",
            ])
        agg = aggregate(cell)
        head = cell[0]
        out.append([
            head.image, repr(head.ratio), head.matrix, head.wavelet, head.strategy, str(head.levels), "agg",
            _num(agg["iterations"]), _num(agg["residual"]), _num(agg["seconds"]),
            _num(agg["psnr_db"]), _num(agg["psnr_std"]), _num(agg["seconds_std"]),
        ])
    return out


def _failed(name, ratio, matrix, wavelet, cfg, trial, exc) -> TrialResult:
    return TrialResult(name, ratio, matrix, wavelet, cfg.strategy, cfg.levels, trial,
                       0, math.nan, math.nan, math.nan, converged=False, error=str(exc))


def run_experiment(cfg: ExperimentConfig, images: dict | None = None):
    """Run the full factorial sweep; returns ``(results, csv_text)``.

    ``images`` may map names to :class:`Image` objects; otherwise every entry
    of ``cfg.images`` is loaded from disk. A failing trial is recorded and the
    sweep continues.
    """
    if images is None:
        images = {Path(p).stem: load_image(p) for p in cfg.images}
    results = []
    cache = {}
    for name, img in images.items():
        for ratio in cfg.ratios:
            for matrix in cfg.matrices:
                # 5/3 first so the matched pipeline can reuse its reconstruction
                order = sorted(cfg.wavelets, key=lambda w: w != "bior53")
                cells = {}
                for wavelet in order:
                    cell = []
                    for trial in range(cfg.trials):
                        try:
                            res = run_trial(img, name, float(ratio), matrix, wavelet, trial, cfg, cache)
                        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                            log.warning("cell %s/%s/%s/%s trial %d failed: %s",
                                        name, ratio, matrix, wavelet, trial, exc)
                            res = _failed(name, float(ratio), matrix, wavelet, cfg, trial, exc)
                        cell.append(res)
                    cells[wavelet] = cell
                cache.clear()
                for wavelet in cfg.wavelets:
                    results.extend(cells[wavelet])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(format_rows(results, cfg.trials))
    text = buf.getvalue()
    if cfg.output:
        Path(cfg.output).write_text(text)
    return results, text


_LIST_KEYS = {"image": "images", "ratio": "ratios", "matrix": "matrices", "wavelet": "wavelets"}
_SOLVER_KEYS = {"max_iters": int, "feas_tol": float, "dual_tol": float, "penalty": float}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key=value`` lines; list keys may repeat or hold comma-separated values."""
    lists = {v: [] for v in _LIST_KEYS.values()}
    scalars = {}
    solver = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _LIST_KEYS or key in lists:
            target = lists[_LIST_KEYS.get(key, key)]
            for item in value.split(","):
                item = item.strip()
                if item:
                    target.append(float(item) if key in ("ratio", "ratios") else item)
        elif key in ("strategy", "l_rule", "output"):
            scalars[key] = value
        elif key in ("levels", "trials", "seed", "block"):
            scalars[key] = int(value)
        elif key in _SOLVER_KEYS:
            solver[key] = _SOLVER_KEYS[key](value)
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    kwargs = {k: tuple(v) for k, v in lists.items() if v}
    kwargs.update(scalars)
    if solver:
        kwargs["solver"] = replace(SolverConfig(), **solver)
    return ExperimentConfig(**kwargs)
