"""Cost estimate from a ratio of shadow prices versus the actual marginal cost."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DomainError, ShadowPriceError
from .orchard import Formulation, Offsets, objective_on_grid
from .sensitivity import fd_shadow_price
from .solver import KktSolution, SolveOptions, solve

UNITS = "$/ton"


def cost_estimate_x(solution: KktSolution, tol: float = 1e-12) -> float:
    """Consumption that offsets one extra unit of flies: ``-xi1 / lambda1``."""
    m = solution.multipliers
    if m.lambda1 <= tol:
        raise DomainError(f"lambda1={m.lambda1} is not positive; cost estimate undefined")
    return -m.xi1 / m.lambda1


def true_marginal_cost(mu: float) -> float:
    """Treatment cost paid per ton of flies removed, ``-g'(mu) / e1'(mu)``.

    With ``g(mu) = mu**2`` and ``e1 = 1 - mu`` this is ``2 * mu``.
    """
    return -(2.0 * mu) / (-1.0)


@dataclass(frozen=True)
class AuditRow:
    variant: Formulation
    solution: KktSolution
    cost_estimate_x: float
    fd_lambda1: float | None
    fd_xi1: float | None
    deviation: float

    @property
    def fd_cost_estimate(self) -> float | None:
        if self.fd_lambda1 is None:
            return None
        return -self.fd_xi1 / self.fd_lambda1


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[AuditRow, ...]
    true_marginal_cost: float
    mu: float
    fd_eps: float | None
    tol_grad: float
    units: str = UNITS

    def estimates(self) -> dict[Formulation, float]:
        return {row.variant: row.cost_estimate_x for row in self.rows}

    @property
    def spread(self) -> float:
        xs = [row.cost_estimate_x for row in self.rows]
        return max(xs) - min(xs)


def _audit_row(variant, opts, fd_eps):
    try:
        sol = solve(variant, None, opts)
    except ConvergenceError as exc:
        raise ShadowPriceError(f"{variant.name}: {exc}") from exc
    x = cost_estimate_x(sol)
    fd_l = fd_x = None
    if fd_eps is not None:
        fd_l = fd_shadow_price(variant, "C1", fd_eps, opts=opts).value
        fd_x = fd_shadow_price(variant, "E1", fd_eps, opts=opts).value
    return AuditRow(variant, sol, x, fd_l, fd_x, x - true_marginal_cost(sol.decision.mu))


def table1(opts: SolveOptions | None = None, fd_eps: float | None = 1e-3) -> AuditReport:
    """Solve all four formulations and tabulate their cost estimates.

    ``fd_eps=None`` skips the finite-difference cross-checks.
    """
    opts = opts or SolveOptions()
    variants = list(Formulation)
    with ThreadPoolExecutor(max_workers=len(variants)) as pool:
        rows = tuple(pool.map(lambda v: _audit_row(v, opts, fd_eps), variants))
    mu = rows[0].solution.decision.mu
    return AuditReport(rows, true_marginal_cost(mu), mu, fd_eps, opts.tol_grad)


def surface_grid(n: int = 200, variant: Formulation = Formulation.BASE, offsets: Offsets = None) -> np.ndarray:
    """``(mu, s, f)`` on the ``(n+1) x (n+1)`` lattice over the unit square.

    Rows run over ``mu`` fastest, then ``s``; infeasible cells carry NaN.
    """
    if n < 2:
        raise ValueError(f"surface resolution must be >= 2, got {n}")
    ticks = np.arange(n + 1) / n
    s, mu = np.meshgrid(ticks, ticks, indexing="ij")
    f = objective_on_grid(variant, mu, s, offsets)
    return np.column_stack([mu.ravel(), s.ravel(), f.ravel()])
