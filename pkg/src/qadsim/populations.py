"""Phonon Fock-population recovery from resonant probe traces.

A measured trace pe(t) is fitted to a weighted sum of simulated single-Fock
basis traces,

    pe(t) = sum_{n=1..n_max} p_n * pe_n(t),

subject to 0 <= p_n and sum_n p_n <= 1, with the vacuum population defined as
p_0 = 1 - sum_n p_n.  The fit is a strictly convex quadratic program (a tiny
ridge term breaks near-collinearity of high-n basis traces) solved exactly by
a primal active-set method, so the constraints hold exactly rather than by
post-hoc clipping.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import DEFAULT_PHONON_DIM, simulate_basis_traces
from .errors import GridMismatchError, ValidationError

DEFAULT_N_MAX = 14
DEFAULT_RIDGE = 1e-9

_KKT_TOL = 1e-9


@dataclass
class PopulationDistribution:
    """Fock populations p[0..n_max] with p[0] = 1 - sum of the rest."""

    p: np.ndarray
    n_max: int

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (self.n_max + 1,):
            raise ValidationError(
                f"population vector length {self.p.size} != n_max + 1 = {self.n_max + 1}"
            )
        if np.any(self.p < -1e-12) or np.any(self.p > 1.0 + 1e-12):
            raise ValidationError("populations must lie in [0, 1]")
        excited = float(self.p[1:].sum())
        if excited > 1.0 + 1e-9:
            raise ValidationError(f"sum of excited populations {excited} > 1")
        if abs(self.p[0] - (1.0 - excited)) > 1e-9:
            raise ValidationError("p[0] must equal 1 - sum of excited populations")

    def argmax(self):
        return int(np.argmax(self.p))


def _active_set_qp(hess, lin, sum_bound=1.0, max_iter=None):
    """Minimize 1/2 x^T H x + c^T x subject to x >= 0 and sum(x) <= b.

    H must be symmetric positive definite.  Returns the exact minimizer with
    active bounds exactly zero; raises if the KKT residual at termination
    exceeds the module tolerance (cannot happen for a PD Hessian).
    """
    n = lin.size
    if max_iter is None:
        max_iter = 50 * (n + 1)
    x = np.zeros(n)
    active_lb = np.ones(n, dtype=bool)  # start at the vertex x = 0
    sum_active = False

    def solve_kkt(free):
        """Direction on free coordinates (and sum-constraint multiplier)."""
        g = hess @ x + lin
        idx = np.flatnonzero(free)
        if idx.size == 0:
            return np.zeros(n), 0.0
        h_ff = hess[np.ix_(idx, idx)]
        if sum_active:
            k = idx.size
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = h_ff
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.concatenate([-g[idx], [0.0]])
            sol = np.linalg.solve(kkt, rhs)
            sol += np.linalg.solve(kkt, rhs - kkt @ sol)  # one refinement step
            d = np.zeros(n)
            d[idx] = sol[:k]
            return d, float(sol[k])
        d_f = np.linalg.solve(h_ff, -g[idx])
        d_f += np.linalg.solve(h_ff, -g[idx] - h_ff @ d_f)
        d = np.zeros(n)
        d[idx] = d_f
        return d, 0.0

    mu = 0.0
    for _ in range(max_iter):
        free = ~active_lb
        d, mu = solve_kkt(free)
        if np.max(np.abs(d), initial=0.0) <= 1e-14:
            # stationary on the working set; check multipliers
            g = hess @ x + lin
            bound_mult = g + mu  # nu_i = g_i + mu on active bounds
            worst_i, worst_v = -1, -1e-12
            for i in np.flatnonzero(active_lb):
                if bound_mult[i] < worst_v:
                    worst_i, worst_v = i, bound_mult[i]
            if sum_active and mu < worst_v:
                worst_i, worst_v = n, mu  # sentinel for the sum constraint
            if worst_i < 0:
                break
            if worst_i == n:
                sum_active = False
            else:
                active_lb[worst_i] = False
            continue
        # step length to the nearest blocking constraint
        alpha = 1.0
        block = None
        for i in np.flatnonzero(free):
            if d[i] < -1e-15:
                a = -x[i] / d[i]
                if a < alpha - 1e-15:
                    alpha, block = a, i
        if not sum_active:
            sd = d.sum()
            if sd > 1e-15:
                a = (sum_bound - x.sum()) / sd
                if a < alpha - 1e-15:
                    alpha, block = a, n
        x = x + max(alpha, 0.0) * d
        if block is None:
            continue
        if block == n:
            sum_active = True
        else:
            x[block] = 0.0
            active_lb[block] = True
    else:
        raise AssertionError("active-set QP failed to terminate (infeasible working set)")

    x[active_lb] = 0.0
    # KKT residual: stationarity on free variables (complementarity is exact)
    g = hess @ x + lin
    free = ~active_lb
    res = np.max(np.abs(g[free] + (mu if sum_active else 0.0)), initial=0.0)
    if res > _KKT_TOL:
        raise AssertionError(f"active-set QP terminated with KKT residual {res:.2e}")
    return x


def extract_populations(trace, basis, n_max=None, ridge=DEFAULT_RIDGE):
    """Constrained least-squares Fock populations from a probe trace.

    ``basis`` must hold the simulated traces for |g, 1> .. |g, n_max> on the
    same time grid as ``trace``.
    """
    if n_max is None:
        n_max = len(basis)
    if len(basis) != n_max:
        raise ValidationError(f"expected {n_max} basis traces, got {len(basis)}")
    for i, b in enumerate(basis):
        if not trace.same_grid(b):
            raise GridMismatchError(f"basis trace {i + 1} is not on the trace's grid")
    design = np.column_stack([b.pe for b in basis])
    hess = 2.0 * (design.T @ design + ridge * np.eye(n_max))
    lin = -2.0 * (design.T @ trace.pe)
    weights = _active_set_qp(hess, lin)
    # the QP enforces the bounds exactly; only the derived p0 needs a guard
    # against sum(weights) = 1 + O(eps) rounding
    p = np.concatenate([[max(1.0 - weights.sum(), 0.0)], weights])
    return PopulationDistribution(p, n_max)


def population_error_bars(
    trace,
    params,
    delta_g,
    n_max=DEFAULT_N_MAX,
    phonon_dim=None,
    ridge=DEFAULT_RIDGE,
):
    """Population distributions re-extracted with basis traces at g0 -+ delta_g.

    Models the dominant extraction systematic (miscalibration of the coupling
    rate); per-n error bars are the min/max envelope of the two returned
    distributions together with the nominal one.
    """
    if delta_g < 0:
        raise ValidationError(f"delta_g must be >= 0, got {delta_g}")
    if phonon_dim is None:
        phonon_dim = DEFAULT_PHONON_DIM
    out = []
    for sign in (-1.0, +1.0):
        perturbed = replace(params, g0=params.g0 + sign * delta_g)
        basis = simulate_basis_traces(perturbed, n_max, trace.times, phonon_dim)
        out.append(extract_populations(trace, basis, n_max, ridge))
    return tuple(out)


def parity_from_populations(pop):
    """Alternating-sign population sum sum_n (-1)^n p_n."""
    signs = (-1.0) ** np.arange(pop.n_max + 1)
    return float(signs @ pop.p)
