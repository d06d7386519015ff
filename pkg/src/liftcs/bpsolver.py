"""Basis pursuit ``min ||s||_1  s.t.  y = A s`` by ADMM.

The splitting is ``x = z`` with ``x`` constrained to the affine set
``{A x = y}`` and ``z`` carrying the l1 norm:

    x <- P(z - u)           projection onto {A x = y}
    x <- a x + (1 - a) z    over-relaxation
    z <- soft(x + u, 1/rho)
    u <- u + x - z

The projection needs ``(A A^T)^-1``, applied by conjugate gradients warm
started from the previous solve. Only ``A`` and ``A^T`` products are used.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .pyramid import DecompositionPlan, SynthesisOperator
from .sensing import DenseSensing, SampleMask, _from_blocks, _to_blocks

__all__ = [
    "SolverConfig",
    "SolveReport",
    "solve_bp",
    "build_operator",
    "dot_test",
    "NonFiniteInputError",
]


class NonFiniteInputError(ValueError):
    """Raised when measurements contain NaN or infinity."""


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    feas_tol: float = 1e-4
    dual_tol: float = 1e-4
    penalty: float = 30.0
    seed: int = 0
    sigma: float = 0.0  # > 0 selects the denoising variant ||y - As|| <= sigma
    relaxation: float = 1.6
    cg_tol: float = 1e-5  # absolute, in units of ||y|| after rescaling
    cg_maxiter: int = 300

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.feas_tol <= 0 or self.dual_tol <= 0 or self.penalty <= 0:
            raise ValueError("tolerances and penalty must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError("relaxation must lie in (0, 2)")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    l1_norm: float
    seconds: float
    converged: bool


def dot_test(op: LinearOperator, rng=None, trials: int = 1) -> float:
    """Largest relative mismatch of ``<Ax, w>`` and ``<x, A^T w>`` over random pairs."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(op.shape[1])
        w = rng.standard_normal(op.shape[0])
        lhs = float(np.dot(op.matvec(x), w))
        rhs = float(np.dot(x, op.rmatvec(w)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def build_operator(sensing, plan: DecompositionPlan, shape) -> LinearOperator:
    """Composite ``A = Phi Psi`` as a matrix-free operator on subband-ordered coefficients."""
    shape = tuple(int(v) for v in shape)
    if tuple(sensing.shape) != shape:
        raise ValueError(f"sensing geometry {sensing.shape} does not match image shape {shape}")
    psi = SynthesisOperator(plan, shape)
    n = shape[0] * shape[1]

    if isinstance(sensing, SampleMask):
        # column-major positions mapped to row-major flat indices of the pixel array
        rows, cols = np.divmod(sensing.omega, shape[0])
        rows, cols = cols, rows
        flat = rows * shape[1] + cols

        def forward(s):
            return psi.apply(np.ravel(s)).ravel()[flat]

        def adjoint(y):
            img = np.zeros(n)
            img[flat] = np.ravel(y)
            return psi.adjoint(img)

        m = sensing.m
    elif isinstance(sensing, DenseSensing):
        phi, block = sensing.matrix, sensing.block

        def forward(s):
            return (_to_blocks(psi.apply(np.ravel(s)), block) @ phi.T).ravel()

        def adjoint(y):
            cols = np.ravel(y).reshape(sensing.n_blocks, sensing.per_block) @ phi
            return psi.adjoint(_from_blocks(cols, shape, block))

        m = sensing.m
    else:
        raise TypeError(f"unsupported sensing object {type(sensing).__name__}")

    return LinearOperator((m, n), matvec=forward, rmatvec=adjoint, dtype=float)


def _soft(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def solve_bp(A: LinearOperator, y, cfg: SolverConfig | None = None, callback=None):
    """Solve basis pursuit with ADMM; returns ``(s, SolveReport)``.

    ``y`` is rescaled to unit RMS internally so that the fixed threshold
    ``1/rho`` means the same thing for every input; the returned solution is
    scaled back. ``callback(iteration, residual)`` is called once per
    iteration if given.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    y = np.asarray(y, dtype=float).ravel()
    m, n = A.shape
    if y.shape != (m,):
        raise ValueError(f"expected {m} measurements, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInputError("measurements contain NaN or infinity")

    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        return np.zeros(n), SolveReport(1, 0.0, 0.0, time.perf_counter() - start, True)
    scale = ynorm / np.sqrt(m)
    b = y / scale
    bnorm = float(np.linalg.norm(b))
    radius = cfg.sigma / scale

    gram = LinearOperator((m, m), matvec=lambda v: A.matvec(A.rmatvec(v)), dtype=float)
    lam = np.zeros(m)

    def project(v):
        # v - A^T (A A^T)^-1 (A v - target); the target is b, or the nearest
        # point of the sigma-ball around b in the denoising variant
        nonlocal lam
        av = A.matvec(v)
        r = av - b
        if radius > 0.0:
            rn = np.linalg.norm(r)
            if rn <= radius:
                return v
            r = r * (1.0 - radius / rn)
        lam, _ = cg(gram, r, x0=lam, rtol=0.0, atol=cfg.cg_tol * bnorm, maxiter=cfg.cg_maxiter)
        return v - A.rmatvec(lam)

    thresh = 1.0 / cfg.penalty
    z = A.rmatvec(b)
    u = np.zeros(n)
    converged = False
    best, best_res = z, np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x = project(z - u)
        x = cfg.relaxation * x + (1.0 - cfg.relaxation) * z
        z_old = z
        z = _soft(x + u, thresh)
        u += x - z
        residual = max(np.linalg.norm(A.matvec(z) - b) - radius, 0.0) / bnorm
        change = np.linalg.norm(z - z_old) / max(np.linalg.norm(z), 1e-300)
        if callback is not None:
            callback(it, residual)
        if residual <= cfg.feas_tol and change <= cfg.dual_tol:
            converged = True
            best, best_res = z, residual
            break
        if residual < best_res:
            best, best_res = z, residual
    residual = best_res
    s = best * scale
    report = SolveReport(
        iterations=it,
        residual=float(residual),
        l1_norm=float(np.abs(s).sum()),
        seconds=time.perf_counter() - start,
        converged=converged,
    )
    return s, report
