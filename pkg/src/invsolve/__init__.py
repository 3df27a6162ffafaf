"""Bouligand-Levenberg-Marquardt regularization for the inverse source
problem of the non-smooth semilinear equation -Laplace(y) + max(y,0) = u."""

__version__ = "0.1.0"

from .mesh_fem import (FEOperators, Mesh, NodeField, assemble_operators,
                       build_mesh, dump_operators, indicator_matrix,
                       interpolate, l2_inner, l2_norm)
from .linsolve import (IterSolveConfig, NoConvergenceError, NotSPDError,
                       SPDSolver, cg_solve, factor_spd, operator_norm)
from .forward import (CorrectionStep, StateSolution, apply_G, apply_Q,
                      correction_step, residual, solve_state)
from .regularize import (DEFAULT_BL_STEP, AlphaSchedule, MethodResult,
                         StoppingRule, bl_run, blm_run, check_scaling)
from .experiment import (ExactPair, ExperimentConfig, ExperimentRecord,
                         NoisyData, exact_pair, initial_guess, log_rate,
                         make_noise, run_experiment, write_results_csv,
                         write_trace_csv)
from .checks import (ConstantsC, DegeneratePairError, LemmaReport,
                     check_spectral_half, check_spectral_halfnu,
                     check_spectral_nu, check_sum_estimates, check_sum_nu,
                     gtcc_probe, kappa_probe, lemma_constants, run_lemma_suite)

__all__ = [name for name in dir() if not name.startswith("_")]
