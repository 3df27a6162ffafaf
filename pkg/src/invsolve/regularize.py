"""Outer iterative regularization drivers.

blm_run is the Levenberg-Marquardt iteration with a Bouligand subderivative
in place of the (generally nonexistent) Frechet derivative: each step adds
the Tikhonov-regularized correction at alpha_n = alpha0 * r^n with the
active set taken from the current state. bl_run is the first-order
Landweber analogue used as a baseline. Both stop by the discrepancy
principle: first index with residual <= tau * delta.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .forward import correction_step, shifted_factor, solve_state
from .linsolve import IterSolveConfig, operator_norm
from .mesh_fem import FEOperators, NodeField, _check_dim, l2_norm

# Landweber step (2 - 2 mu) / Lbar^2 for mu = 0.1, Lbar = 0.05
DEFAULT_BL_STEP = (2.0 - 2.0 * 0.1) / 0.05 ** 2
DEFAULT_BLM_MAX_ITER = 60
DEFAULT_BL_MAX_ITER = 200_000


@dataclass(frozen=True)
class AlphaSchedule:
    """Geometric Tikhonov parameters alpha_n = alpha0 * r^n."""

    alpha0: float
    r: float

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if not 0.0 < self.r < 1.0:
            raise ValueError("r must lie in (0, 1)")

    def alpha(self, n: int) -> float:
        """alpha_n by repeated multiplication (one multiply per step)."""
        a = self.alpha0
        for _ in range(n):
            a *= self.r
        return a

    def sequence(self, count: int) -> np.ndarray:
        """First ``count`` parameters, same floating path as alpha()."""
        return np.cumprod(np.concatenate([[self.alpha0], np.full(max(count - 1, 0), self.r)]))[:count]


@dataclass(frozen=True)
class StoppingRule:
    """Discrepancy principle: stop at the first residual <= tau * delta."""

    tau: float
    delta: float
    max_iter: int

    def __post_init__(self):
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")


@dataclass
class MethodResult:
    """Trace of one reconstruction run.

    residuals[n] is ||ydelta - F(u_n)|| for n = 0..stop_index; with
    discrepancy termination, residuals[stop_index] <= tau*delta and all
    earlier residuals exceed it. Per-step arrays (alphas, wall_times, ...)
    have length stop_index.
    """

    stop_index: int
    u: NodeField
    residuals: np.ndarray
    alphas: np.ndarray
    terminated_by: str
    errors_to_truth: np.ndarray | None = None
    iterates: list | None = None
    wall_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    step_norms: np.ndarray = field(default_factory=lambda: np.empty(0))
    ssn_iters: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    cg_iters: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def _run_loop(ops, ydelta, rule, u0, utruth, keep_iterates, stepper, alphas_of):
    """Shared discrepancy-stopped outer loop; ``stepper`` produces (s, cg_iters)."""
    _check_dim(ops, ydelta, "ydelta")
    _check_dim(ops, u0, "u0")
    u = np.array(u0, dtype=float)
    threshold = rule.tau * rule.delta
    residuals, errors, wall, steps, ssn, cgs = [], [], [], [], [], []
    iterates = [u.copy()] if keep_iterates else None
    state = solve_state(ops, u)
    res = l2_norm(ops, ydelta - state.y)
    residuals.append(res)
    if utruth is not None:
        errors.append(l2_norm(ops, u - utruth))
    terminated = "discrepancy"
    n = 0
    while res > threshold:
        if n >= rule.max_iter:
            terminated = "max_iter"
            warnings.warn(f"stopped at max_iter={rule.max_iter} with residual "
                          f"{res:.3e} > {threshold:.3e}", stacklevel=3)
            break
        t0 = time.perf_counter()
        s, cg_n = stepper(n, state, ydelta - state.y)
        u = u + s
        state = solve_state(ops, u, y0=state.y)
        res = l2_norm(ops, ydelta - state.y)
        wall.append(time.perf_counter() - t0)
        steps.append(l2_norm(ops, s))
        ssn.append(state.ssn_iters)
        cgs.append(cg_n)
        residuals.append(res)
        if utruth is not None:
            errors.append(l2_norm(ops, u - utruth))
        if keep_iterates:
            iterates.append(u.copy())
        n += 1
    return MethodResult(
        stop_index=n, u=u,
        residuals=np.array(residuals),
        alphas=alphas_of(n),
        terminated_by=terminated,
        errors_to_truth=np.array(errors) if utruth is not None else None,
        iterates=iterates,
        wall_times=np.array(wall), step_norms=np.array(steps),
        ssn_iters=np.array(ssn, dtype=int), cg_iters=np.array(cgs, dtype=int))


def blm_run(ops: FEOperators, ydelta: NodeField, rule: StoppingRule,
            u0: NodeField, sched: AlphaSchedule, utruth: NodeField | None = None,
            cfg: IterSolveConfig = IterSolveConfig(), correction_method: str = "cg",
            keep_iterates: bool = False) -> MethodResult:
    """Bouligand-Levenberg-Marquardt iteration with discrepancy stopping."""
    alphas = sched.sequence(rule.max_iter)

    def stepper(n, state, b):
        step = correction_step(ops, state.active, b, alphas[n], cfg=cfg,
                               method=correction_method)
        return step.s, step.inner_iters

    return _run_loop(ops, ydelta, rule, u0, utruth, keep_iterates, stepper,
                     alphas_of=lambda n: alphas[:n])


def bl_run(ops: FEOperators, ydelta: NodeField, rule: StoppingRule,
           u0: NodeField, step_w: float = DEFAULT_BL_STEP,
           utruth: NodeField | None = None,
           keep_iterates: bool = False) -> MethodResult:
    """Bouligand-Landweber baseline: u_{n+1} = u_n + w G (ydelta - F(u_n))."""
    if step_w <= 0:
        raise ValueError("step_w must be positive")

    def stepper(n, state, b):
        fac = shifted_factor(ops, state.active)
        return step_w * fac.solve(ops.M @ b), 0

    return _run_loop(ops, ydelta, rule, u0, utruth, keep_iterates, stepper,
                     alphas_of=lambda n: np.empty(0))


def check_scaling(ops: FEOperators, uref: NodeField,
                  sched: AlphaSchedule) -> tuple[float, bool]:
    """Estimate ||G_uref|| in the M-geometry and test it against sqrt(alpha0).

    Advisory only: the condition can always be met by rescaling the problem,
    so a violation is worth a warning, not an abort.
    """
    state = solve_state(ops, uref)
    fac = shifted_factor(ops, state.active)
    g = lambda v: fac.solve(ops.M @ v)
    inner = lambda v, w: float(v @ (ops.M @ w))
    estimate = operator_norm(lambda v: g(g(v)), inner, ops.d_h)
    satisfied = estimate <= np.sqrt(sched.alpha0)
    if not satisfied:
        warnings.warn(f"||G|| ~ {estimate:.3e} exceeds sqrt(alpha0) = "
                      f"{np.sqrt(sched.alpha0):.3e}; consider rescaling",
                      stacklevel=2)
    return estimate, satisfied
