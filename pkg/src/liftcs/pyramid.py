"""Separable multi-level 2-D decompositions (R-Pyramid and L-Pyramid).

Coefficients are kept in an in-place layout: an ``m x n`` array whose
rectangular regions are the subbands. A column split of a region puts the
lowpass half on top (ceil) and the highpass half below (floor); a row split
puts lowpass left and highpass right.

Subband labels name the column operation first. R-Pyramid blocks are
``LL3, LH2, ...``. L-Pyramid blocks carry a level per direction, e.g. ``L2H1``
is lowpass twice along columns and highpass once along rows.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .imaging import Image
from .lifting import LiftingChain, forward_1d, inverse_1d, transpose_inverse_1d

__all__ = [
    "DecompositionPlan",
    "Subband",
    "SubbandTree",
    "subband_layout",
    "forward_2d",
    "inverse_2d",
    "synthesis_apply",
    "synthesis_adjoint",
    "SynthesisOperator",
    "write_tree",
    "read_tree",
]

STRATEGIES = ("r-pyramid", "l-pyramid")
L_RULES = ("recursive", "latest-trio")


@dataclass(frozen=True)
class DecompositionPlan:
    col_chain: LiftingChain
    row_chain: LiftingChain
    levels: int = 3
    strategy: str = "l-pyramid"
    l_rule: str = "recursive"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.l_rule not in L_RULES:
            raise ValueError(f"l_rule must be one of {L_RULES}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @classmethod
    def uniform(cls, chain: LiftingChain, **kwargs) -> "DecompositionPlan":
        return cls(chain, chain, **kwargs)


@dataclass(frozen=True)
class Subband:
    label: str
    row0: int
    col0: int
    rows: int
    cols: int

    @property
    def region(self):
        return np.s_[self.row0 : self.row0 + self.rows, self.col0 : self.col0 + self.cols]


@dataclass(frozen=True)
class _Split:
    axis: int  # 0: transform along columns, 1: along rows
    row0: int
    col0: int
    rows: int
    cols: int

    @property
    def region(self):
        return np.s_[self.row0 : self.row0 + self.rows, self.col0 : self.col0 + self.cols]

    @property
    def length(self):
        return self.rows if self.axis == 0 else self.cols


@dataclass
class _Block:
    row0: int
    col0: int
    rows: int
    cols: int
    cs: str = "L"
    cl: int = 0
    rs: str = "L"
    rl: int = 0


def _wants(block: _Block, level: int, strategy: str, l_rule: str) -> tuple[bool, bool]:
    ll = block.cs == "L" and block.rs == "L"
    if strategy == "r-pyramid" or level == 1:
        return ll, ll
    if l_rule == "recursive":
        return block.cs == "L", block.rs == "L"
    # latest-trio: LL plus the LH/HL made from the previous LL split
    prev = level - 1
    fresh = block.cl == prev and block.rl == prev
    return (
        ll or (fresh and block.cs == "L" and block.rs == "H"),
        ll or (fresh and block.cs == "H" and block.rs == "L"),
    )


def _check_shape(shape, levels):
    m, n = shape
    depth = 2**levels
    if -(-m // depth) < 2 or -(-n // depth) < 2:
        raise ValueError(
            f"shape {shape} does not admit {levels} levels "
            "(need at least 2 samples per direction at the deepest level)"
        )


@lru_cache(maxsize=64)
def _layout(shape, levels, strategy, l_rule):
    _check_shape(shape, levels)
    blocks = [_Block(0, 0, shape[0], shape[1])]
    splits = []
    for level in range(1, levels + 1):
        wants = [_wants(b, level, strategy, l_rule) for b in blocks]
        after_cols = []
        for b, (do_col, do_row) in zip(blocks, wants):
            if not do_col:
                after_cols.append((b, do_row))
                continue
            splits.append(_Split(0, b.row0, b.col0, b.rows, b.cols))
            top = -(-b.rows // 2)
            lo = _Block(b.row0, b.col0, top, b.cols, "L", level, b.rs, b.rl)
            hi = _Block(b.row0 + top, b.col0, b.rows - top, b.cols, "H", level, b.rs, b.rl)
            after_cols += [(lo, do_row), (hi, do_row)]
        blocks = []
        for b, do_row in after_cols:
            if not do_row:
                blocks.append(b)
                continue
            splits.append(_Split(1, b.row0, b.col0, b.rows, b.cols))
            left = -(-b.cols // 2)
            blocks.append(_Block(b.row0, b.col0, b.rows, left, b.cs, b.cl, "L", level))
            blocks.append(_Block(b.row0, b.col0 + left, b.rows, b.cols - left, b.cs, b.cl, "H", level))

    def rank(state, lev):
        return 0 if state == "L" else levels - lev + 1

    def key(b):
        cr, rr = rank(b.cs, b.cl), rank(b.rs, b.rl)
        group = 0 if rr > cr else (1 if cr > rr else 2)
        return (max(cr, rr), group, min(cr, rr))

    def label(b):
        if strategy == "r-pyramid":
            return f"{b.cs}{b.rs}{b.cl}"
        return f"{b.cs}{b.cl}{b.rs}{b.rl}"

    ordered = sorted(blocks, key=key)
    subbands = tuple(Subband(label(b), b.row0, b.col0, b.rows, b.cols) for b in ordered)
    perm = np.concatenate(
        [
            (np.arange(s.row0, s.row0 + s.rows)[:, None] * shape[1]
             + np.arange(s.col0, s.col0 + s.cols)[None, :]).ravel()
            for s in subbands
        ]
    )
    perm.setflags(write=False)
    return tuple(splits), subbands, perm


def subband_layout(shape, plan: DecompositionPlan) -> tuple[Subband, ...]:
    """Ordered subband descriptors; the order is the coefficient-vector order."""
    shape = tuple(int(v) for v in shape)
    return _layout(shape, plan.levels, plan.strategy, plan.l_rule)[1]


class SubbandTree:
    """Coefficients of one decomposition, stored in the in-place layout."""

    def __init__(self, plan: DecompositionPlan, coeffs):
        self.plan = plan
        self.coeffs = np.array(coeffs, dtype=float)
        self.origin_shape = self.coeffs.shape
        self._splits, self._subbands, self._perm = _layout(
            self.origin_shape, plan.levels, plan.strategy, plan.l_rule
        )

    @property
    def subbands(self):
        return [(s.label, s.rows, s.cols, self.coeffs[s.region]) for s in self._subbands]

    @property
    def labels(self):
        return [s.label for s in self._subbands]

    def __getitem__(self, label):
        for s in self._subbands:
            if s.label == label:
                return self.coeffs[s.region]
        raise KeyError(label)

    def __len__(self):
        return self.coeffs.size

    def flatten(self) -> np.ndarray:
        return self.coeffs.ravel()[self._perm]

    @classmethod
    def from_vector(cls, values, plan: DecompositionPlan, shape) -> "SubbandTree":
        shape = tuple(int(v) for v in shape)
        values = np.asarray(values, dtype=float)
        _, _, perm = _layout(shape, plan.levels, plan.strategy, plan.l_rule)
        if values.size != perm.size:
            raise ValueError(f"coefficient vector has {values.size} entries, expected {perm.size}")
        coeffs = np.empty(perm.size)
        coeffs[perm] = values
        return cls(plan, coeffs.reshape(shape))


def _chain_for(plan, axis):
    return plan.col_chain if axis == 0 else plan.row_chain


def forward_2d(img, plan: DecompositionPlan) -> SubbandTree:
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)
    coeffs = np.array(pixels, dtype=float)
    splits, _, _ = _layout(coeffs.shape, plan.levels, plan.strategy, plan.l_rule)
    for sp_ in splits:
        block = coeffs[sp_.region]
        chain = _chain_for(plan, sp_.axis)
        if sp_.axis == 0:
            a, d = forward_1d(block, chain)
            coeffs[sp_.region] = np.vstack([a, d])
        else:
            a, d = forward_1d(block.T, chain)
            coeffs[sp_.region] = np.vstack([a, d]).T
    return SubbandTree(plan, coeffs)


def _inverse_coeffs(coeffs, plan):
    splits, _, _ = _layout(coeffs.shape, plan.levels, plan.strategy, plan.l_rule)
    for sp_ in reversed(splits):
        block = coeffs[sp_.region]
        chain = _chain_for(plan, sp_.axis)
        if sp_.axis == 0:
            na = -(-block.shape[0] // 2)
            coeffs[sp_.region] = inverse_1d(block[:na], block[na:], chain)
        else:
            na = -(-block.shape[1] // 2)
            coeffs[sp_.region] = inverse_1d(block[:, :na].T, block[:, na:].T, chain).T
    return coeffs


def inverse_2d(tree: SubbandTree) -> Image:
    return Image(_inverse_coeffs(tree.coeffs.copy(), tree.plan))


def synthesis_apply(s, plan: DecompositionPlan, shape) -> Image:
    """Image synthesized from a flat coefficient vector (the operator Psi)."""
    return inverse_2d(SubbandTree.from_vector(s, plan, shape))


def synthesis_adjoint(img, plan: DecompositionPlan) -> np.ndarray:
    """Transpose of :func:`synthesis_apply`, via transposed lifting steps."""
    pixels = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=float)
    coeffs = np.array(pixels, dtype=float)
    splits, _, perm = _layout(coeffs.shape, plan.levels, plan.strategy, plan.l_rule)
    for sp_ in splits:
        block = coeffs[sp_.region]
        chain = _chain_for(plan, sp_.axis)
        if sp_.axis == 0:
            coeffs[sp_.region] = np.vstack(transpose_inverse_1d(block, chain))
        else:
            coeffs[sp_.region] = np.vstack(transpose_inverse_1d(block.T, chain)).T
    return coeffs.ravel()[perm]


@lru_cache(maxsize=128)
def _level_matrices(length: int, chain: LiftingChain):
    """Dense single-level synthesis matrix and its transpose for one axis length."""
    eye = np.eye(length)
    na = -(-length // 2)
    synth = inverse_1d(eye[:na], eye[na:], chain)
    adj = np.vstack(transpose_inverse_1d(eye, chain))
    synth.setflags(write=False)
    adj.setflags(write=False)
    return synth, adj


class SynthesisOperator:
    """Fast ``Psi`` / ``Psi^T`` for a fixed plan and shape.

    Each single-level 1-D step is materialized once as a small dense matrix
    (one per distinct block length), so applying the operator is a short
    sequence of matrix products on sub-blocks.
    """

    def __init__(self, plan: DecompositionPlan, shape):
        self.plan = plan
        self.shape = tuple(int(v) for v in shape)
        self._splits, self.subbands, self._perm = _layout(
            self.shape, plan.levels, plan.strategy, plan.l_rule
        )
        self._mats = [_level_matrices(s.length, _chain_for(plan, s.axis)) for s in self._splits]
        self.size = self.shape[0] * self.shape[1]

    def apply(self, s) -> np.ndarray:
        coeffs = np.empty(self.size)
        coeffs[self._perm] = s
        coeffs = coeffs.reshape(self.shape)
        for sp_, (synth, _) in zip(reversed(self._splits), reversed(self._mats)):
            r = sp_.region
            if sp_.axis == 0:
                coeffs[r] = synth @ coeffs[r]
            else:
                coeffs[r] = coeffs[r] @ synth.T
        return coeffs

    def adjoint(self, pixels) -> np.ndarray:
        coeffs = np.array(pixels, dtype=float).reshape(self.shape)
        for sp_, (_, adj) in zip(self._splits, self._mats):
            r = sp_.region
            if sp_.axis == 0:
                coeffs[r] = adj @ coeffs[r]
            else:
                coeffs[r] = coeffs[r] @ adj.T
        return coeffs.ravel()[self._perm]


# ---------------------------------------------------------------------------
# Serialization


def write_tree(tree: SubbandTree, path) -> None:
    """Text header of ``label rows cols`` lines, then little-endian float64 values."""
    plan = tree.plan
    m, n = tree.origin_shape
    lines = [
        f"SUBBANDTREE {m} {n} {plan.strategy} {plan.levels} {plan.l_rule} {len(tree._subbands)}"
    ]
    lines += [f"{s.label} {s.rows} {s.cols}" for s in tree._subbands]
    header = ("\n".join(lines) + "\nDATA\n").encode("ascii")
    values = tree.flatten()
    Path(path).write_bytes(header + struct.pack(f"<{values.size}d", *values))


def read_tree(path, col_chain: LiftingChain, row_chain: LiftingChain | None = None) -> SubbandTree:
    data = Path(path).read_bytes()
    end = data.index(b"\nDATA\n")
    header = data[:end].decode("ascii").splitlines()
    magic, m, n, strategy, levels, l_rule, count = header[0].split()
    if magic != "SUBBANDTREE":
        raise ValueError("not a subband tree file")
    plan = DecompositionPlan(
        col_chain, row_chain or col_chain, int(levels), strategy, l_rule
    )
    shape = (int(m), int(n))
    expected = [(s.label, s.rows, s.cols) for s in subband_layout(shape, plan)]
    listed = [(lab, int(r), int(c)) for lab, r, c in (ln.split() for ln in header[1:])]
    if listed != expected or len(listed) != int(count):
        raise ValueError("subband header does not match the plan layout")
    values = np.frombuffer(data[end + 6 :], dtype="<f8")
    return SubbandTree.from_vector(values, plan, shape)
