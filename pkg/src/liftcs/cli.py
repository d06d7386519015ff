"""Command-line front end: ``liftcs sense|design|reconstruct|experiment``.

Exit codes: 0 on success, 1 on bad input, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bpsolver import NonFiniteInputError, SolverConfig
from .harness import (
    HEADER,
    _standard,
    make_sensing,
    measure,
    parse_config,
    run_experiment,
)
from .imaging import ImageFormatError, load_image, save_image
from .lifting import compose_filterbank
from .matched import (
    coarse_estimate,
    design_matched,
    read_design,
    reconstruct_matched,
    write_design,
)
from .metrics import format_psnr, psnr
from .sensing import (
    DenseSensing,
    Measurements,
    read_mask,
    read_measurements,
    write_mask,
    write_measurements,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("liftcs")


class InputError(Exception):
    pass


def _paths(prefix):
    prefix = Path(prefix)
    return prefix.with_suffix(".meas"), prefix.with_suffix(".mask")


def cmd_sense(args) -> int:
    img = load_image(args.image)
    start = time.perf_counter()
    sensing = make_sensing(args.matrix, img.shape, args.ratio, args.seed, args.block)
    y = measure(img, sensing)
    elapsed = time.perf_counter() - start
    meas_path, mask_path = _paths(args.out)
    block = 0 if args.matrix == "pci" else args.block
    write_measurements(Measurements(y, img.shape, args.ratio, args.seed, args.matrix, block), meas_path)
    if args.matrix == "pci":
        write_mask(sensing, mask_path)
    n = img.shape[0] * img.shape[1]
    print(f"M={y.size} N={n} seconds={elapsed:.4f}")
    return EXIT_OK


def _load_inputs(args):
    meas = read_measurements(args.measurements)
    if meas.kind == "pci":
        mask_path = args.mask or Path(args.measurements).with_suffix(".mask")
        sensing = read_mask(mask_path)
        if sensing.shape != meas.shape or sensing.m != meas.values.size:
            raise InputError("mask does not match the measurement file")
    else:
        sensing = DenseSensing(meas.kind, meas.shape, meas.block, meas.ratio, meas.seed)
        if sensing.m != meas.values.size:
            raise InputError("measurement count does not match the dense sensing setup")
    return meas, sensing


def _solver(args):
    return SolverConfig(max_iters=args.max_iters)


def _print_design(design):
    for name, chain in (("column", design.col_chain), ("row", design.row_chain)):
        bank = compose_filterbank(chain)
        for k, stage in enumerate(chain.stages):
            print(f"{name} stage {k}: t = {np.round(stage.predict, 4).tolist()}  "
                  f"s = {np.round(stage.update, 4).tolist()}")
        print(f"{name} h0 = {np.round(bank.h0.taps, 4).tolist()}")
        print(f"{name} h1 = {np.round(bank.h1.taps, 4).tolist()}")


def cmd_design(args) -> int:
    meas, sensing = _load_inputs(args)
    common = dict(levels=args.levels, strategy=args.strategy)
    coarse, rep = coarse_estimate(meas.values, sensing, cfg=_solver(args), **common)
    design = design_matched(coarse, args.lt, args.ls, args.stages,
                            meta={"ratio": meas.ratio, "seed": meas.seed})
    write_design(design, args.out)
    _print_design(design)
    return EXIT_OK


def _append_report(path, row):
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(HEADER)
        writer.writerow(row)


def cmd_reconstruct(args) -> int:
    meas, sensing = _load_inputs(args)
    cfg = _solver(args)
    common = dict(levels=args.levels, strategy=args.strategy, cfg=cfg)
    reference = load_image(args.reference) if args.reference else None
    coarse = None
    if args.wavelet == "matched":
        if args.design:
            design = read_design(args.design)
            seconds = 0.0
        elif args.auto_design:
            coarse, crep = coarse_estimate(meas.values, sensing, **common)
            design = design_matched(coarse, meta={"ratio": meas.ratio, "seed": meas.seed})
            seconds = crep.seconds
        else:
            raise InputError("--wavelet matched needs --design FILE or --auto-design")
        rec, rep = reconstruct_matched(meas.values, sensing, design, **common)
        seconds += rep.seconds
    else:
        rec, rep = _standard(meas.values, sensing, args.wavelet, args.levels, args.strategy,
                             "recursive", cfg)
        seconds = rep.seconds
    if not np.all(np.isfinite(rec.pixels)):
        print("reconstruction produced non-finite pixels", file=sys.stderr)
        return EXIT_NUMERIC
    save_image(rec, args.output)
    db = psnr(reference, rec).psnr_db if reference is not None else math.nan
    if coarse is not None and reference is not None:
        print(f"coarse PSNR {format_psnr(psnr(reference, coarse).psnr_db)} dB")
    print(f"PSNR {format_psnr(db) if not math.isnan(db) else 'n/a'} dB  iterations={rep.iterations} "
          f"residual={rep.residual:.2e} converged={rep.converged}")
    if args.report:
        _append_report(args.report, [
            Path(args.reference).stem if args.reference else Path(args.measurements).stem,
            repr(meas.ratio), meas.kind, args.wavelet, args.strategy, str(args.levels), "0",
            str(rep.iterations), repr(rep.residual), f"{seconds:.4f}",
            format_psnr(db) if not math.isnan(db) else "nan", "", "",
        ])
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    if args.output:
        from dataclasses import replace

        cfg = replace(cfg, output=args.output)
    _, text = run_experiment(cfg)
    if not cfg.output:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftcs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sense", help="measure an image")
    p.add_argument("--image", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--matrix", choices=("pci", "gaussian", "bernoulli"), default="pci")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.meas and PREFIX.mask")
    p.set_defaults(func=cmd_sense)

    def add_recon_args(p):
        p.add_argument("--measurements", required=True)
        p.add_argument("--mask")
        p.add_argument("--levels", type=int, default=3)
        p.add_argument("--strategy", choices=("l-pyramid", "r-pyramid"), default="l-pyramid")
        p.add_argument("--max-iters", type=int, default=500)

    p = sub.add_parser("design", help="design matched lifting filters from measurements")
    add_recon_args(p)
    p.add_argument("--lt", type=int, default=2)
    p.add_argument("--ls", type=int, default=2)
    p.add_argument("--stages", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("reconstruct", help="reconstruct an image by basis pursuit")
    add_recon_args(p)
    p.add_argument("--wavelet", choices=("bior53", "db2", "db4", "matched"), default="bior53")
    p.add_argument("--design")
    p.add_argument("--auto-design", action="store_true")
    p.add_argument("--reference", help="original image, for PSNR")
    p.add_argument("--report", help="CSV file to append a result row to")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("experiment", help="run a sweep described by a key=value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NonFiniteInputError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ImageFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
