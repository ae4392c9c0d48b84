"""Interior maximum of the reduced problem and multiplier recovery.

The reduced problem in ``(mu, s)`` is solved by damped Newton seeded from a
grid search. The optimum is then lifted to the full six-variable point and
the four equality multipliers are recovered from the stationarity system
``grad U = sum_j m_j grad g_j`` in the least-squares sense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError, DomainError, RankDeficiencyError
from .nlp import (
    CONSTRAINT_NAMES,
    MultiplierSet,
    Problem,
    residual_vector,
    stationarity_residual,
)
from .orchard import (
    Decision,
    Formulation,
    Offsets,
    StateVector,
    as_offsets,
    build_problem,
    chain_feasible,
    evaluate_chain,
    grid_argmax,
    reduced_gradient_hessian,
    reduced_objective,
)

log = logging.getLogger(__name__)

_ROUNDOFF = 4 * np.finfo(float).eps

FOC_KEYS = ("dL/dmu", "dL/ds", "dL/dc1", "dL/dc2", "dL/de1", "dL/de2") + CONSTRAINT_NAMES


@dataclass(frozen=True)
class SolveOptions:
    grid_n: int = 256
    tol_grad: float = 1e-12
    max_iter: int = 100
    backtrack_factor: float = 0.5
    min_step: float = 1e-16
    armijo: float = 1e-4

    def __post_init__(self):
        if self.grid_n < 2:
            raise ValueError("grid_n must be >= 2")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.tol_grad <= 0 or self.min_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class KktSolution:
    variant: Formulation
    offsets: tuple[float, float, float, float]
    decision: Decision
    state: StateVector
    objective: float
    multipliers: MultiplierSet
    stationarity_residual_inf: float
    constraint_residual_inf: float
    grad_inf: float
    iterations: int
    history: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def point(self) -> np.ndarray:
        return self.state.point(self.decision)

    @property
    def problem(self) -> Problem:
        return build_problem(self.variant, self.offsets)


def grid_seed(variant: Formulation, offsets: Offsets = None, n: int = 256) -> Decision:
    """Best feasible cell centre of an ``n x n`` grid."""
    return grid_argmax(variant, offsets, n)[0]


def _trial_value(variant, d, r):
    if not chain_feasible(variant, d, r, strict=True):
        return None
    return reduced_objective(variant, d, r)


def newton_maximize(variant: Formulation, start: Decision, offsets: Offsets = None, opts: SolveOptions | None = None):
    """Damped Newton ascent on the reduced objective.

    Returns ``(decision, value, grad_inf, iterations, history)`` where
    ``history`` holds the objective at every accepted iterate. Trial points
    outside the box or with ``c1 <= 0`` / ``c2 <= 0`` count as line-search
    failures.
    """
    opts = opts or SolveOptions()
    r = as_offsets(offsets)
    x = start.as_array()
    d = start
    f = _trial_value(variant, d, r)
    if f is None:
        raise DomainError(f"start point {start} is not strictly feasible")
    history = [f]
    for it in range(opts.max_iter + 1):
        g, h = reduced_gradient_hessian(variant, d, r)
        grad_inf = float(np.max(np.abs(g)))
        if grad_inf <= opts.tol_grad:
            return d, f, grad_inf, it, tuple(history)
        if it == opts.max_iter:
            break
        newton = True
        try:
            chol = scipy.linalg.cho_factor(-h)
            p = scipy.linalg.cho_solve(chol, g)
        except np.linalg.LinAlgError:
            newton = False
            p = g  # not negative definite: steepest ascent
        slope = float(g @ p)
        if newton and 0.5 * slope <= _ROUNDOFF * max(1.0, abs(f)):
            # predicted gain is below the resolution of f, so comparing
            # objective values is meaningless; take the full Newton step
            xt = x + p
            dt = Decision(float(xt[0]), float(xt[1]))
            ft = _trial_value(variant, dt, r)
            if ft is None:
                break
            x, d, f = xt, dt, ft
            history.append(f)
            continue
        step = 1.0
        while step >= opts.min_step:
            xt = x + step * p
            dt = Decision(float(xt[0]), float(xt[1]))
            ft = _trial_value(variant, dt, r)
            if ft is not None and ft >= f + opts.armijo * step * slope and not np.array_equal(xt, x):
                break
            step *= opts.backtrack_factor
        else:
            break
        x, d, f = xt, dt, ft
        history.append(f)
    raise ConvergenceError(
        f"Newton stopped after {it} iterations with |grad|_inf={grad_inf:.3e} > {opts.tol_grad:.1e}",
        decision=d,
        objective=f,
        grad_inf=grad_inf,
        iterations=it,
    )


def recover_multipliers(problem: Problem, z) -> tuple[MultiplierSet, float]:
    """Least-squares solution of ``J m = grad U`` via a QR factorization.

    ``J`` is the 6 x 4 matrix of constraint gradients. All six stationarity
    equations are used, so the returned residual norm is also an
    optimality certificate: it vanishes only at a stationary point.
    """
    z = np.asarray(z, dtype=float)
    jac = problem.jacobian(z)
    rhs = problem.objective_gradient(z)
    q, rr = scipy.linalg.qr(jac, mode="economic")
    diag = np.abs(np.diag(rr))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise RankDeficiencyError(f"constraint Jacobian is rank deficient (|diag R| = {diag})")
    m = MultiplierSet.from_array(scipy.linalg.solve_triangular(rr, q.T @ rhs))
    res = stationarity_residual(problem, z, m)
    return m, float(np.max(np.abs(res)))


def solve(variant: Formulation, offsets: Offsets = None, opts: SolveOptions | None = None, start: Decision | None = None) -> KktSolution:
    opts = opts or SolveOptions()
    r = as_offsets(offsets)
    if start is None:
        start = grid_seed(variant, r, opts.grid_n)
    d, f, grad_inf, iterations, history = newton_maximize(variant, start, r, opts)
    state = evaluate_chain(variant, d, r)
    problem = build_problem(variant, r)
    z = state.point(d)
    m, stat_inf = recover_multipliers(problem, z)
    cons_inf = float(np.max(np.abs(residual_vector(problem, z))))
    log.debug("solved %s in %d iterations: mu=%.12g s=%.12g", variant.name, iterations, d.mu, d.s)
    return KktSolution(
        variant=variant,
        offsets=tuple(float(v) for v in r),
        decision=d,
        state=state,
        objective=f,
        multipliers=m,
        stationarity_residual_inf=stat_inf,
        constraint_residual_inf=cons_inf,
        grad_inf=grad_inf,
        iterations=iterations,
        history=history,
    )


def lagrangian_gradient_base(z, m: MultiplierSet) -> np.ndarray:
    """Partial derivatives of ``-U + sum_j m_j (g_j - r_j)`` for the BASE formulation, written out by hand."""
    mu, s, c1, c2, e1, e2 = (float(v) for v in z)
    lam1, xi1, lam2, xi2 = m.lambda1, m.xi1, m.lambda2, m.xi2
    return np.array([
        2 * lam1 * mu + xi1 - lam2 * (1 - e2) * s - xi2 * s,
        lam1 * (1 - e1) - lam2 * (1 - e2) * mu - xi2 * mu,
        -1 / (2 * np.sqrt(c1)) + lam1,
        -1 / (2 * np.sqrt(c2)) + lam2,
        lam1 * (1 - s) + xi1,
        lam2 * mu * s + xi2,
    ])


def lagrangian_gradient(problem: Problem, z, m: MultiplierSet) -> np.ndarray:
    """Generic form of the same derivatives, valid for every formulation."""
    return -stationarity_residual(problem, z, m)


def foc_report(solution: KktSolution, multipliers: MultiplierSet | None = None) -> dict[str, float]:
    """Named Lagrangian derivatives and constraint residuals at the solution.

    ``multipliers`` overrides the recovered ones (useful for probing).
    """
    m = multipliers or solution.multipliers
    z = solution.point
    problem = solution.problem
    if solution.variant is Formulation.BASE:
        dl = lagrangian_gradient_base(z, m)
    else:
        dl = lagrangian_gradient(problem, z, m)
    values = np.concatenate([dl, residual_vector(problem, z)])
    return {k: float(v) for k, v in zip(FOC_KEYS, values)}
