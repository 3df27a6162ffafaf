"""Sparse SPD solves, conjugate gradients, and operator-norm estimation.

The only module that factors or iterates on linear systems. Direct solves
use SuperLU in symmetric mode (diagonal pivoting, fill-reducing ordering),
which on an SPD matrix is a Cholesky-like factorization; non-positive
pivots signal a non-SPD input. CG works with a caller-supplied inner
product so the correction system can be solved in the M-geometry without
forming the reduced operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class NotSPDError(ValueError):
    """Matrix handed to factor_spd is not symmetric positive definite."""


class NoConvergenceError(RuntimeError):
    """Iteration hit its cap; carries the best iterate seen so far."""

    def __init__(self, message: str, iterate=None, residual: float = np.nan):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


@dataclass(frozen=True)
class IterSolveConfig:
    rel_tol: float = 1e-12
    max_iter: int = 0  # 0 -> 10 * problem dimension

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")

    def cap(self, dim: int) -> int:
        return self.max_iter if self.max_iter else 10 * dim


class SPDSolver:
    """Factorization of a fixed SPD matrix; solves are reusable and read-only."""

    def __init__(self, lu: spla.SuperLU, dim: int):
        self._lu = lu
        self.dim = dim

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(b)


def factor_spd(S: sp.sparray) -> SPDSolver:
    """Factor a sparse SPD matrix for repeated solves.

    Uses SuperLU with diagonal pivoting and an AT+A ordering, so the pivots
    are the diagonal of U; any non-positive pivot means S was not SPD
    (typically an assembly bug or a sign error in an indicator matrix).
    """
    S = sp.csc_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise NotSPDError(f"matrix is {S.shape}, not square")
    try:
        lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # singular factor
        raise NotSPDError(f"factorization failed: {exc}") from exc
    pivots = lu.U.diagonal()
    if not np.all(pivots > 0):
        raise NotSPDError("non-positive pivot encountered: matrix is not SPD")
    return SPDSolver(lu, S.shape[0])


def cg_solve(apply, b: np.ndarray, inner, cfg: IterSolveConfig = IterSolveConfig(),
             callback=None) -> tuple[np.ndarray, int]:
    """Conjugate gradients for apply(x) = b, self-adjoint PD w.r.t. ``inner``.

    Returns (x, iterations). Convergence is ||apply(x) - b|| <= rel_tol ||b||
    in the norm induced by ``inner``. Raises NoConvergenceError carrying the
    best iterate if the cap is reached.
    """
    x = np.zeros_like(b)
    r = b.copy()
    rr = inner(r, r)
    b_norm = np.sqrt(max(inner(b, b), 0.0))
    if b_norm == 0.0:
        return x, 0
    tol = cfg.rel_tol * b_norm
    p = r.copy()
    for k in range(cfg.cap(b.size)):
        if np.sqrt(max(rr, 0.0)) <= tol:
            return x, k
        ap = apply(p)
        alpha = rr / inner(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = inner(r, r)
        if callback is not None:
            callback(k, x, r, p)
        p = r + (rr_new / rr) * p
        rr = rr_new
    if np.sqrt(max(rr, 0.0)) <= tol:
        return x, cfg.cap(b.size)
    raise NoConvergenceError(
        f"CG did not reach rel_tol={cfg.rel_tol:.1e} within {cfg.cap(b.size)} iterations "
        f"(residual {np.sqrt(rr) / b_norm:.3e} relative)",
        iterate=x, residual=float(np.sqrt(max(rr, 0.0))))


def operator_norm(apply, inner, dim: int, tol: float = 1e-10,
                  max_iter: int = 2000, seed: int = 0) -> float:
    """Power iteration on a self-adjoint PSD operator; returns sqrt(lambda_max).

    The estimate is accepted once the Rayleigh quotient changes by less than
    ``tol`` relatively between sweeps. A (deflated-to-)zero vector yields 0.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    nx = np.sqrt(max(inner(x, x), 0.0))
    if nx == 0.0:
        return 0.0
    x /= nx
    lam = 0.0
    for _ in range(max_iter):
        y = apply(x)
        lam_new = inner(x, y)
        ny = np.sqrt(max(inner(y, y), 0.0))
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(lam_new - lam) <= tol * max(abs(lam_new), np.finfo(float).tiny):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))
