"""Discrete non-smooth forward operator and its Bouligand linearizations.

The state equation A y + D max(y,0) = M u is solved by a semismooth Newton
method that terminates when two consecutive active sets coincide, at which
point the nonlinear system is satisfied exactly (up to the linear solver).
A subderivative application solves (A + K_y) zeta = M h with the indicator
matrix K_y of the active set; because A + K_y and M are symmetric, this
operator is self-adjoint in the M-inner product and no transpose solves
are ever needed. The correction step solves the Tikhonov normal equation
(alpha I + G G) s = G b, either matrix-free by CG on the reduced operator
(one factorization of A + K_y, reused for every application) or directly
via the equivalent sparse 2x2 block system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .linsolve import (IterSolveConfig, NoConvergenceError, SPDSolver, cg_solve,
                       factor_spd)
from .mesh_fem import FEOperators, NodeField, _check_dim, active_matrix

SSN_MAX_ITER = 100


@dataclass(frozen=True)
class StateSolution:
    """State solve result: coefficients y, active set, and diagnostics."""

    y: NodeField
    active: np.ndarray
    ssn_iters: int
    final_residual: float


@dataclass(frozen=True)
class CorrectionStep:
    """One Levenberg-Marquardt update: direction s and auxiliary z = G s."""

    s: NodeField
    z: NodeField
    inner_iters: int


def shifted_factor(ops: FEOperators, active: np.ndarray) -> SPDSolver:
    """Factor A + K for the given active set (K diagonal, PSD)."""
    return factor_spd(ops.A + active_matrix(ops, active.astype(bool)))


def solve_state(ops: FEOperators, u: NodeField, y0: NodeField | None = None,
                max_iter: int = SSN_MAX_ITER) -> StateSolution:
    """Solve A y + D max(y,0) = M u by semismooth Newton.

    Step k solves (A + D Theta_k) y = M u with Theta_k the indicator of
    {y_k > 0}; iteration stops when the active set repeats. y0 is only a
    warm start; the solution is unique regardless.
    """
    _check_dim(ops, u, "u")
    mu = ops.M @ u
    y = np.zeros(ops.d_h) if y0 is None else np.asarray(y0, dtype=float)
    _check_dim(ops, y, "y0")
    active = y > 0.0
    for k in range(1, max_iter + 1):
        fac = shifted_factor(ops, active)
        y = fac.solve(mu)
        new_active = y > 0.0
        if np.array_equal(new_active, active):
            res = float(np.max(np.abs(ops.A @ y + ops.D * np.maximum(y, 0.0) - mu),
                               initial=0.0))
            return StateSolution(y=y, active=new_active, ssn_iters=k,
                                 final_residual=res)
        active = new_active
    raise NoConvergenceError(
        f"semismooth Newton did not settle within {max_iter} iterations",
        iterate=y)


def apply_G(ops: FEOperators, active: np.ndarray, h: NodeField,
            fac: SPDSolver) -> NodeField:
    """Apply the Bouligand subderivative: solve (A + K) zeta = M h."""
    _check_dim(ops, h, "h")
    if fac.dim != ops.d_h:
        raise ValueError("factorization dimension does not match operators")
    return fac.solve(ops.M @ h)


def correction_step(ops: FEOperators, active: np.ndarray, b: NodeField,
                    alpha: float, cfg: IterSolveConfig = IterSolveConfig(),
                    method: str = "cg") -> CorrectionStep:
    """Solve (alpha I + G G) s = G b for the update direction s.

    method="cg" (default): CG on the reduced M-self-adjoint operator with a
    single factorization of A + K. method="block": direct sparse solve of
    the coupled system [[A+K, -M], [M, alpha(A+K)]] [z; s] = [0; M b],
    which is the alpha-scaled form of the two elliptic correction equations.
    """
    _check_dim(ops, b, "b")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    mask = active.astype(bool)
    C = ops.A + active_matrix(ops, mask)
    if method == "cg":
        fac = factor_spd(C)
        g = lambda v: fac.solve(ops.M @ v)
        gb = g(b)
        inner = lambda v, w: float(v @ (ops.M @ w))
        s, iters = cg_solve(lambda v: alpha * v + g(g(v)), gb, inner, cfg)
        return CorrectionStep(s=s, z=g(s), inner_iters=iters)
    if method == "block":
        d = ops.d_h
        block = sp.bmat([[C, -ops.M], [ops.M, alpha * C]], format="csc")
        rhs = np.concatenate([np.zeros(d), ops.M @ b])
        zs = spla.splu(block).solve(rhs)
        return CorrectionStep(s=zs[d:], z=zs[:d], inner_iters=0)
    raise ValueError(f"unknown correction method {method!r}")


def residual(ops: FEOperators, u: NodeField, ydelta: NodeField,
             y0: NodeField | None = None) -> tuple[float, StateSolution]:
    """Data misfit ||ydelta - F(u)|| in the discrete L2 norm, plus the state."""
    _check_dim(ops, ydelta, "ydelta")
    state = solve_state(ops, u, y0=y0)
    diff = ydelta - state.y
    return float(np.sqrt(max(diff @ (ops.M @ diff), 0.0))), state


def apply_Q(ops: FEOperators, active1: np.ndarray, active2: np.ndarray,
            v: NodeField, fac1: SPDSolver | None = None) -> NodeField:
    """Apply Q = (A + K_1)^{-1} (A + K_2), the derivative-transfer operator."""
    _check_dim(ops, v, "v")
    if fac1 is None:
        fac1 = shifted_factor(ops, active1)
    C2 = ops.A + active_matrix(ops, active2.astype(bool))
    return fac1.solve(C2 @ v)
