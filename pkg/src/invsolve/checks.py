"""Executable verification of the summation and spectral-filter estimates.

The geometric parameter sequence alpha_n = alpha0 r^n obeys a family of
summation inequalities with closed-form constants, and products of Tikhonov
filters alpha_j (alpha_j I + T'T)^{-1} obey spectral norm bounds; both
underpin the stopping-index analysis of the outer iteration. Each check
evaluates its inequalities directly (sums by brute force, norms by dense
eigendecomposition) and reports the worst slack. Inequalities are
normalized by their alpha-weight so every compared quantity is O(1) and a
1e-10 absolute violation threshold is meaningful.

Also here: empirical probes for the tangential-cone ratio and the norm of
I - Q(u1, u2), which the theory bounds by eta(rho) < 1 and kappa(rho) on
neighborhoods of the exact source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import apply_G, apply_Q, shifted_factor, solve_state
from .linsolve import factor_spd, operator_norm
from .mesh_fem import FEOperators, NodeField, active_matrix, l2_norm

VIOLATION_TOL = 1e-10


class DegeneratePairError(ValueError):
    """The probe pair produced an (almost) zero denominator."""


@dataclass(frozen=True)
class ConstantsC:
    """Closed-form constants of the summation estimates for a given rate r."""

    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    K0: float
    K1: float


def lemma_constants(r: float, nu: float = 0.0) -> ConstantsC:
    """Constants c0..c4 from r and K0, K1 from (r, nu), 0 <= nu < 1/2."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    if not 0.0 <= nu < 0.5:
        raise ValueError("nu must lie in [0, 1/2)")
    sr = np.sqrt(r)
    gap = r ** (nu - 0.5) - 1.0
    return ConstantsC(c0=1.0 / sr, c1=1.0 / (1.0 - sr), c2=1.0 / (sr * (1.0 - sr)),
                      c3=sr / (1.0 - r), c4=1.0 / (1.0 - r),
                      K0=1.0 / (sr * gap), K1=1.0 / (r * gap))


@dataclass(frozen=True)
class LemmaReport:
    """Worst slack over all tested cases; pass means max_violation <= 1e-10."""

    lemma_id: str
    max_violation: float
    cases_tested: int
    worst_case: str

    @property
    def passed(self) -> bool:
        return self.max_violation <= VIOLATION_TOL


def _report(lemma_id, slacks):
    """Aggregate (slack, description) pairs into a LemmaReport."""
    worst, desc = max(slacks, key=lambda t: t[0])
    return LemmaReport(lemma_id=lemma_id, max_violation=worst,
                       cases_tested=len(slacks), worst_case=desc)


def check_sum_estimates(alpha0: float, r: float, k_max: int) -> LemmaReport:
    """All five summation inequalities with constants c0..c4, for k <= k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    c = lemma_constants(r)
    alphas = alpha0 * np.power(r, np.arange(k_max + 2, dtype=float))
    inv = 1.0 / alphas
    slacks = []
    for k in range(k_max + 1):
        tail = np.cumsum(inv[k::-1])[::-1]   # tail[m] = sum_{j=m}^{k} 1/alpha_j
        a_next = alphas[k + 1]
        cases = [
            ("c0", 1.0 / tail[0] / a_next, c.c0 ** 2),
            ("c1", float(np.sum(inv[:k + 1] ** 0.5 * tail ** -0.5)), c.c1),
            ("c2", float(np.sum(inv[:k + 1] ** 0.5 / tail)) / a_next ** 0.5, c.c2),
            ("c3", float(np.sum(inv[:k + 1] / tail ** 0.5)) * a_next ** 0.5, c.c3),
            ("c4", float(np.sum(inv[:k + 1] / tail)), c.c4),
        ]
        for name, lhs, bound in cases:
            slacks.append((lhs - bound,
                           f"{name}: k={k}, alpha0={alpha0}, r={r}"))
    return _report("sum-estimates", slacks)


def check_sum_nu(alpha0: float, r: float, nu: float, k_max: int) -> LemmaReport:
    """Both nu-weighted summation inequalities (constants K0, K1), k <= k_max."""
    if not 0.0 <= nu < 0.5:
        raise ValueError("nu must lie in [0, 1/2): the K constants blow up")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    c = lemma_constants(r, nu)
    alphas = alpha0 * np.power(r, np.arange(k_max + 2, dtype=float))
    inv = 1.0 / alphas
    slacks = []
    for k in range(k_max + 1):
        tail = np.cumsum(inv[k::-1])[::-1]
        a_next = alphas[k + 1]
        weights = alphas[:k + 1] ** (nu - 0.5)
        lhs0 = float(np.sum(weights * tail ** -0.5)) / a_next ** nu
        lhs1 = float(np.sum(weights / tail)) / a_next ** (nu + 0.5)
        slacks.append((lhs0 - c.K0, f"K0: k={k}, nu={nu}, r={r}"))
        slacks.append((lhs1 - c.K1, f"K1: k={k}, nu={nu}, r={r}"))
    return _report("sum-nu", slacks)


def _filter_product(TtT: np.ndarray, alphas: np.ndarray):
    """Eigendecomposition of T'T plus the filter values prod alpha/(alpha+lam)."""
    lam, V = np.linalg.eigh(TtT)
    lam = np.clip(lam, 0.0, None)
    g = np.prod(alphas[:, None] / (alphas[:, None] + lam[None, :]), axis=0)
    return lam, V, g


def _spectral_case(T, alpha0, r, m, l, nu, with_adjoint):
    """Spectral norm of prod_j alpha_j (alpha_j I + T'T)^{-1} (T'T)^nu [T'],
    and the corresponding summation bound."""
    if m > l:
        raise ValueError("need m <= l")
    T = np.asarray(T, dtype=float)
    alphas = alpha0 * np.power(r, np.arange(m, l + 1, dtype=float))
    lam, V, g = _filter_product(T.T @ T, alphas)
    P = (V * (g * lam ** nu)) @ V.T
    if with_adjoint:
        P = P @ T.T
    norm = np.linalg.norm(P, 2) if P.size else 0.0
    inv_sum = float(np.sum(1.0 / alphas))
    return float(norm), inv_sum


def check_spectral_nu(T, alpha0: float, r: float, m: int, l: int,
                      nu: float) -> LemmaReport:
    """||prod alpha_j (alpha_j I + T'T)^{-1} (T'T)^nu|| <= (sum 1/alpha_j)^-nu."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError("nu must lie in [0, 1]")
    norm, inv_sum = _spectral_case(T, alpha0, r, m, l, nu, with_adjoint=False)
    bound = inv_sum ** (-nu)
    return _report("spectral-nu",
                   [(norm - bound, f"nu={nu}, m={m}, l={l}, r={r}")])


def check_spectral_half(T, alpha0: float, r: float, m: int,
                        l: int) -> LemmaReport:
    """||prod alpha_j (alpha_j I + T'T)^{-1} T'|| <= (1/2)(sum 1/alpha_j)^-1/2."""
    norm, inv_sum = _spectral_case(T, alpha0, r, m, l, 0.0, with_adjoint=True)
    bound = 0.5 * inv_sum ** -0.5
    return _report("spectral-half", [(norm - bound, f"m={m}, l={l}, r={r}")])


def check_spectral_halfnu(T, alpha0: float, r: float, m: int, l: int,
                          nu: float) -> LemmaReport:
    """||prod alpha_j (alpha_j I + T'T)^{-1} (T'T)^nu T'|| <= (sum)^-(nu+1/2)."""
    if not 0.0 <= nu <= 0.5:
        raise ValueError("nu must lie in [0, 1/2]")
    norm, inv_sum = _spectral_case(T, alpha0, r, m, l, nu, with_adjoint=True)
    bound = inv_sum ** (-nu - 0.5)
    return _report("spectral-halfnu",
                   [(norm - bound, f"nu={nu}, m={m}, l={l}, r={r}")])


# parameter grids exercised by `invsolve check`
GRID_R = (0.3, 0.5, 0.7, 0.9)
GRID_ALPHA0 = (0.5, 1.0, 4.0)
GRID_NU_SUM = (0.0, 0.1, 0.25, 0.4, 0.49)
GRID_NU_SPECTRAL = (0.0, 0.1, 0.25, 0.4, 0.5)
GRID_K_MAX = 50
GRID_MATRICES = 20


def _merge(lemma_id: str, reports: list[LemmaReport]) -> LemmaReport:
    worst = max(reports, key=lambda rep: rep.max_violation)
    return LemmaReport(lemma_id=lemma_id, max_violation=worst.max_violation,
                       cases_tested=sum(rep.cases_tested for rep in reports),
                       worst_case=worst.worst_case)


def run_lemma_suite(grid: str = "full", seed: int = 0) -> list[LemmaReport]:
    """Run every lemma check over the parameter grid; one report per lemma."""
    if grid == "full":
        rs, a0s, nus_sum, nus_spec = GRID_R, GRID_ALPHA0, GRID_NU_SUM, GRID_NU_SPECTRAL
        k_max, n_mat = GRID_K_MAX, GRID_MATRICES
    elif grid == "small":
        rs, a0s, nus_sum, nus_spec = (0.5,), (1.0,), (0.0, 0.25), (0.0, 0.5)
        k_max, n_mat = 20, 5
    else:
        raise ValueError(f"unknown grid {grid!r}")

    rng = np.random.default_rng(seed)
    matrices = [rng.standard_normal((rng.integers(2, 9), rng.integers(2, 9)))
                for _ in range(n_mat)]
    spans = [sorted(rng.integers(0, 11, size=2)) for _ in range(n_mat)]

    sums, sums_nu, spec_nu, spec_half, spec_halfnu = [], [], [], [], []
    for r in rs:
        for a0 in a0s:
            sums.append(check_sum_estimates(a0, r, k_max))
            for nu in nus_sum:
                sums_nu.append(check_sum_nu(a0, r, nu, k_max))
            for T, (m, l) in zip(matrices, spans):
                spec_half.append(check_spectral_half(T, a0, r, m, l))
                for nu in nus_spec:
                    spec_nu.append(check_spectral_nu(T, a0, r, m, l, nu))
                    spec_halfnu.append(check_spectral_halfnu(T, a0, r, m, l, nu))
    return [_merge("sum-estimates", sums),
            _merge("sum-nu", sums_nu),
            _merge("spectral-nu", spec_nu),
            _merge("spectral-half", spec_half),
            _merge("spectral-halfnu", spec_halfnu)]


def gtcc_probe(ops: FEOperators, u: NodeField, uhat: NodeField) -> float:
    """Empirical tangential-cone ratio
    ||F(uhat) - F(u) - G_u (uhat - u)|| / ||F(uhat) - F(u)||."""
    state = solve_state(ops, u)
    state_hat = solve_state(ops, uhat)
    diff = state_hat.y - state.y
    den = l2_norm(ops, diff)
    if den <= 1e-14:
        raise DegeneratePairError(
            f"||F(uhat) - F(u)|| = {den:.3e} is too small to form the ratio")
    fac = shifted_factor(ops, state.active)
    lin = apply_G(ops, state.active, uhat - u, fac)
    return l2_norm(ops, diff - lin) / den


def kappa_probe(ops: FEOperators, u1: NodeField, u2: NodeField,
                tol: float = 1e-10) -> float:
    """Estimate ||I - Q(u1, u2)|| in the M-operator norm by power iteration.

    Q = C1^{-1} C2 with C_i = A + K_i is not M-self-adjoint, so the norm is
    obtained from the dominant eigenvalue of (I - Q)* (I - Q), where the
    M-adjoint is (I - Q)* = M^{-1} (I - C2 C1^{-1}) M.
    """
    active1 = solve_state(ops, u1).active
    active2 = solve_state(ops, u2).active
    fac1 = shifted_factor(ops, active1)
    fac_m = factor_spd(ops.M)
    C2 = ops.A + active_matrix(ops, active2)

    def composed(v):
        t = v - apply_Q(ops, active1, active2, v, fac1=fac1)
        s = ops.M @ t
        return fac_m.solve(s - C2 @ fac1.solve(s))

    inner = lambda v, w: float(v @ (ops.M @ w))
    return operator_norm(composed, inner, ops.d_h, tol=tol)
