"""End-to-end numerical study: exact solutions, noise, metrics, CSV, runs.

The benchmark problem on (0,1)^2 uses the exact state
    y(x1,x2) = (x1-beta)^2 (x1-1+beta)^2 sin(2 pi x2) on the strip
               beta <= x1 <= 1-beta (zero outside),
whose source u = max(y,0) - Delta y is known in closed form. y vanishes on
a set of measure 2 beta, so the forward map is non-differentiable at the
exact source for beta > 0. Noise is an i.i.d. Gaussian draw rescaled to hit
the requested discrete L2 noise level exactly; both target and realized
values are recorded.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .mesh_fem import (FEOperators, Mesh, NodeField, assemble_operators,
                       build_mesh, interpolate, l2_norm)
from .linsolve import IterSolveConfig, NoConvergenceError, NotSPDError
from .regularize import (DEFAULT_BL_MAX_ITER, DEFAULT_BL_STEP,
                         DEFAULT_BLM_MAX_ITER, AlphaSchedule, MethodResult,
                         StoppingRule, bl_run, blm_run)

RNG_NAME = "numpy.random.default_rng/PCG64"

RESULT_COLUMNS = ["method", "beta", "nh", "seed", "delta", "N_delta", "LR",
                  "E", "R", "alpha_final", "cpu_seconds"]
TRACE_COLUMNS = ["n", "alpha_n", "residual", "error_to_truth", "step_norm",
                 "ssn_iters", "cg_iters", "seconds"]


@dataclass(frozen=True)
class ExactPair:
    """Exact source/state pair interpolated onto the interior nodes."""

    beta: float
    u_truth: NodeField
    y_truth: NodeField


@dataclass(frozen=True)
class NoisyData:
    ydelta: NodeField
    delta_realized: float
    seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    nh: int
    beta: float = 0.005
    alpha0: float = 1.0
    r: float = 0.5
    tau: float = 1.5
    method: str = "blm"
    u0: str = "source"
    deltas: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    seeds: tuple[int, ...] = (42,)
    max_iter: int = 0          # 0 -> method default
    bl_step: float = DEFAULT_BL_STEP
    correction_method: str = "cg"

    def validate(self) -> None:
        if self.nh < 3:
            raise ValueError("nh must be >= 3")
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError("beta must lie in [0, 0.5]")
        if self.method not in ("blm", "bl"):
            raise ValueError(f"method must be 'blm' or 'bl', got {self.method!r}")
        if self.u0 not in ("zero", "source"):
            raise ValueError(f"u0 must be 'zero' or 'source', got {self.u0!r}")
        if not self.deltas:
            raise ValueError("at least one noise level is required")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("noise levels must be positive: the discrepancy "
                             "principle is undefined at delta = 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")

    def iteration_cap(self) -> int:
        if self.max_iter:
            return self.max_iter
        return DEFAULT_BLM_MAX_ITER if self.method == "blm" else DEFAULT_BL_MAX_ITER


@dataclass
class ExperimentRecord:
    method: str
    beta: float
    nh: int
    seed: int
    delta: float
    N_delta: int
    LR: float
    E: float
    R: float
    alpha_final: float
    cpu_seconds: float
    failed: bool = False


def exact_pair(beta: float, mesh: Mesh) -> ExactPair:
    """Nodal interpolants of the exact state and source for a given beta."""
    if not 0.0 <= beta <= 0.5:
        raise ValueError(f"beta must lie in [0, 0.5], got {beta}")
    y = interpolate(lambda x1, x2: _y_truth(x1, x2, beta), mesh)
    u = interpolate(lambda x1, x2: _u_truth(x1, x2, beta), mesh)
    return ExactPair(beta=beta, u_truth=u, y_truth=y)


def _y_truth(x1, x2, beta):
    chi = (x1 >= beta) & (x1 <= 1.0 - beta)
    return (x1 - beta) ** 2 * (x1 - 1.0 + beta) ** 2 * np.sin(2 * np.pi * x2) * chi


def _u_truth(x1, x2, beta):
    chi = (x1 >= beta) & (x1 <= 1.0 - beta)
    y = _y_truth(x1, x2, beta)
    lap = 4 * np.pi ** 2 * y - 2.0 * ((2 * x1 - 1.0) ** 2
                                      + 2.0 * (x1 - 1.0 + beta) * (x1 - beta)) \
        * np.sin(2 * np.pi * x2)
    return np.maximum(y, 0.0) + lap * chi


def make_noise(ops: FEOperators, y_truth: NodeField, delta_target: float,
               seed: int) -> NoisyData:
    """Gaussian perturbation rescaled so the discrete L2 noise level is exact."""
    if delta_target < 0:
        raise ValueError("delta_target must be >= 0")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(ops.d_h)
    if l2_norm(ops, g) == 0.0:
        g = rng.standard_normal(ops.d_h)
        if l2_norm(ops, g) == 0.0:
            raise RuntimeError("degenerate zero noise draw (twice)")
    ydelta = y_truth + (delta_target / l2_norm(ops, g)) * g
    return NoisyData(ydelta=ydelta, delta_realized=l2_norm(ops, y_truth - ydelta),
                     seed=seed)


def initial_guess(kind: str, pair: ExactPair, mesh: Mesh) -> NodeField:
    """Starting point: zero, or the source-condition guess
    u_truth - 20 sin(pi x1) sin(2 pi x2)."""
    if kind == "zero":
        return np.zeros(mesh.d_h)
    if kind == "source":
        bump = interpolate(
            lambda x1, x2: 20.0 * np.sin(np.pi * x1) * np.sin(2 * np.pi * x2), mesh)
        return pair.u_truth - bump
    raise ValueError(f"unknown starting guess {kind!r}")


def log_rate(n_delta: int, delta: float) -> float:
    """Logarithmic rate of the stopping index, N / (1 + |ln delta|)."""
    return n_delta / (1.0 + abs(math.log(delta)))


def run_experiment(config: ExperimentConfig,
                   keep_results: bool = False):
    """Run the configured method over all (delta, seed) pairs.

    Returns the list of ExperimentRecord, or (records, results) with the
    per-run MethodResult traces when keep_results is set. A failing run is
    marked (failed=True, NaN metrics) and the remaining records still run.
    """
    config.validate()
    mesh = build_mesh(config.nh)
    ops = assemble_operators(mesh)
    pair = exact_pair(config.beta, mesh)
    u0 = initial_guess(config.u0, pair, mesh)
    sched = AlphaSchedule(config.alpha0, config.r)
    u_norm = l2_norm(ops, pair.u_truth)

    records: list[ExperimentRecord] = []
    results: list[MethodResult | None] = []
    for delta in config.deltas:
        for seed in config.seeds:
            data = make_noise(ops, pair.y_truth, delta, seed)
            rule = StoppingRule(tau=config.tau, delta=data.delta_realized,
                                max_iter=config.iteration_cap())
            t0 = time.perf_counter()
            try:
                if config.method == "blm":
                    result = blm_run(ops, data.ydelta, rule, u0, sched,
                                     utruth=pair.u_truth,
                                     correction_method=config.correction_method)
                else:
                    result = bl_run(ops, data.ydelta, rule, u0,
                                    step_w=config.bl_step, utruth=pair.u_truth)
            except (NoConvergenceError, NotSPDError) as exc:
                warnings.warn(f"run (delta={delta:g}, seed={seed}) failed: {exc}",
                              stacklevel=2)
                records.append(ExperimentRecord(
                    method=config.method, beta=config.beta, nh=config.nh,
                    seed=seed, delta=delta, N_delta=-1, LR=math.nan, E=math.nan,
                    R=math.nan, alpha_final=math.nan,
                    cpu_seconds=time.perf_counter() - t0, failed=True))
                results.append(None)
                continue
            elapsed = time.perf_counter() - t0
            err = l2_norm(ops, pair.u_truth - result.u)
            records.append(ExperimentRecord(
                method=config.method, beta=config.beta, nh=config.nh, seed=seed,
                delta=delta, N_delta=result.stop_index,
                LR=log_rate(result.stop_index, delta),
                E=err / u_norm, R=err / math.sqrt(delta),
                alpha_final=sched.alpha(result.stop_index)
                if config.method == "blm" else math.nan,
                cpu_seconds=elapsed))
            results.append(result)
    if keep_results:
        return records, results
    return records


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(records: list[ExperimentRecord], path: str) -> None:
    """Write records in the fixed column order with a provenance header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# invsolve {__version__}; rng={RNG_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in RESULT_COLUMNS])


def write_trace_csv(records: list[ExperimentRecord],
                    results: list[MethodResult | None], path: str) -> None:
    """Per-iteration traces of each run; the final iterate row has no step."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# invsolve {__version__}; rng={RNG_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec, result in zip(records, results):
            fh.write(f"# method={rec.method} delta={_fmt(rec.delta)} "
                     f"seed={rec.seed}\n")
            if result is None:
                continue
            for n in range(result.stop_index + 1):
                stepped = n < result.stop_index
                err = (result.errors_to_truth[n]
                       if result.errors_to_truth is not None else math.nan)
                writer.writerow([
                    n,
                    _fmt(float(result.alphas[n])) if stepped and result.alphas.size else "",
                    _fmt(float(result.residuals[n])),
                    _fmt(float(err)),
                    _fmt(float(result.step_norms[n])) if stepped else "",
                    int(result.ssn_iters[n]) if stepped else "",
                    int(result.cg_iters[n]) if stepped else "",
                    _fmt(float(result.wall_times[n])) if stepped else "",
                ])
