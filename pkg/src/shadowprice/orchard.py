"""Two-period fruit-storage instance.

A storage manager picks a pesticide rate ``mu`` and a saving ratio ``s``.
With unit initial stock, unit fly emission rate, damage share equal to the
fly quantity and treatment cost ``mu**2`` the state chain is::

    e1 = 1 - mu
    c1 = (1 - e1) * (1 - s) - mu**2
    e2 = mu * s                      (or p2 = (1 - e1) * s)
    c2 = (1 - e2) * mu * s           (or (1 - e2) * p2)

and utility is ``sqrt(c1) + sqrt(c2)``. The bracketed alternatives express
period-2 quantities through the carried-over stock ``p2``. They coincide
with the originals whenever ``1 - e1 == mu``, i.e. at zero offsets, but
induce different perturbed problems once an offset is put on the fly
equation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .exceptions import DomainError, InfeasibleError
from .nlp import (
    CONSTRAINT_NAMES,
    ORCHARD_SPACE,
    EqualityConstraint,
    InequalityConstraint,
    Problem,
)

Offsets = Union[None, Sequence[float], Mapping[str, float], np.ndarray]

MU, S, C1, C2, E1, E2 = range(6)


class Formulation(enum.Enum):
    """The four equivalent ways of writing the period-2 equations.

    Members are listed in the row order of the ``table1`` report.
    """

    BASE = "a"
    STOCK_FLIES = "b"
    STOCK_CONSUMPTION = "c"
    STOCK_BOTH = "d"

    @property
    def consumption_from_stock(self) -> bool:
        return self in (Formulation.STOCK_CONSUMPTION, Formulation.STOCK_BOTH)

    @property
    def flies_from_stock(self) -> bool:
        return self in (Formulation.STOCK_FLIES, Formulation.STOCK_BOTH)

    @property
    def label(self) -> str:
        c2 = "c2=(1-e2)(1-e1)s" if self.consumption_from_stock else "c2=(1-e2)mu*s"
        e2 = "e2=(1-e1)s" if self.flies_from_stock else "e2=mu*s"
        return f"{c2}; {e2}"

    @classmethod
    def from_code(cls, code: str) -> "Formulation":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown formulation code {code!r}; expected one of a, b, c, d") from None


@dataclass(frozen=True)
class Decision:
    mu: float
    s: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.s])


@dataclass(frozen=True)
class StateVector:
    c1: float
    c2: float
    e1: float
    e2: float
    p2: float

    def point(self, d: Decision) -> np.ndarray:
        """Full point ``(mu, s, c1, c2, e1, e2)``."""
        return np.array([d.mu, d.s, self.c1, self.c2, self.e1, self.e2])


def as_offsets(offsets: Offsets = None) -> np.ndarray:
    """Normalize offsets to a float 4-vector ordered C1, E1, C2, E2."""
    if offsets is None:
        return np.zeros(4)
    if isinstance(offsets, Mapping):
        unknown = set(offsets) - set(CONSTRAINT_NAMES)
        if unknown:
            raise KeyError(f"unknown constraint(s) {sorted(unknown)}")
        out = np.array([float(offsets.get(n, 0.0)) for n in CONSTRAINT_NAMES])
    else:
        out = np.asarray(offsets, dtype=float).reshape(-1)
        if out.shape != (4,):
            raise ValueError(f"offsets must have 4 components, got {out.shape[0]}")
    if not np.all(np.isfinite(out)):
        raise ValueError("offsets must be finite")
    return out


# ---------------------------------------------------------------------------
# constrained (full-space) problem


def _objective(z):
    return float(np.sqrt(z[C1]) + np.sqrt(z[C2]))


def _objective_gradient(z):
    if z[C1] <= 0 or z[C2] <= 0:
        raise DomainError(f"objective gradient needs c1 > 0 and c2 > 0, got c1={z[C1]}, c2={z[C2]}")
    g = np.zeros(6)
    g[C1] = 0.5 / np.sqrt(z[C1])
    g[C2] = 0.5 / np.sqrt(z[C2])
    return g


def _c1_residual(z):
    return z[C1] - ((1 - z[E1]) * (1 - z[S]) - z[MU] ** 2)


def _c1_gradient(z):
    g = np.zeros(6)
    g[MU] = 2 * z[MU]
    g[S] = 1 - z[E1]
    g[C1] = 1.0
    g[E1] = 1 - z[S]
    return g


def _e1_residual(z):
    return z[E1] - (1 - z[MU])


def _e1_gradient(z):
    g = np.zeros(6)
    g[MU] = 1.0
    g[E1] = 1.0
    return g


def _c2_residual(z):
    return z[C2] - (1 - z[E2]) * z[MU] * z[S]


def _c2_gradient(z):
    g = np.zeros(6)
    g[MU] = -(1 - z[E2]) * z[S]
    g[S] = -(1 - z[E2]) * z[MU]
    g[C2] = 1.0
    g[E2] = z[MU] * z[S]
    return g


def _c2_stock_residual(z):
    return z[C2] - (1 - z[E2]) * (1 - z[E1]) * z[S]


def _c2_stock_gradient(z):
    g = np.zeros(6)
    g[S] = -(1 - z[E2]) * (1 - z[E1])
    g[C2] = 1.0
    g[E1] = (1 - z[E2]) * z[S]
    g[E2] = (1 - z[E1]) * z[S]
    return g


def _e2_residual(z):
    return z[E2] - z[MU] * z[S]


def _e2_gradient(z):
    g = np.zeros(6)
    g[MU] = -z[S]
    g[S] = -z[MU]
    g[E2] = 1.0
    return g


def _e2_stock_residual(z):
    return z[E2] - (1 - z[E1]) * z[S]


def _e2_stock_gradient(z):
    g = np.zeros(6)
    g[S] = -(1 - z[E1])
    g[E1] = z[S]
    g[E2] = 1.0
    return g


_INEQUALITIES = (
    InequalityConstraint("mu>=0", lambda z: z[MU]),
    InequalityConstraint("mu<=1", lambda z: 1 - z[MU]),
    InequalityConstraint("s>=0", lambda z: z[S]),
    InequalityConstraint("s<=1", lambda z: 1 - z[S]),
    InequalityConstraint("mu(1-s)-mu^2>=0", lambda z: z[MU] * (1 - z[S]) - z[MU] ** 2),
    InequalityConstraint("c1>=0", lambda z: z[C1]),
    InequalityConstraint("c2>=0", lambda z: z[C2]),
)


def build_problem(variant: Formulation, offsets: Offsets = None) -> Problem:
    """Full six-variable problem for one formulation."""
    r = as_offsets(offsets)
    if variant.consumption_from_stock:
        c2 = (_c2_stock_residual, _c2_stock_gradient)
    else:
        c2 = (_c2_residual, _c2_gradient)
    if variant.flies_from_stock:
        e2 = (_e2_stock_residual, _e2_stock_gradient)
    else:
        e2 = (_e2_residual, _e2_gradient)
    equalities = (
        EqualityConstraint("C1", _c1_residual, _c1_gradient, r[0]),
        EqualityConstraint("E1", _e1_residual, _e1_gradient, r[1]),
        EqualityConstraint("C2", *c2, r[2]),
        EqualityConstraint("E2", *e2, r[3]),
    )
    return Problem(ORCHARD_SPACE, _objective, _objective_gradient, equalities, _INEQUALITIES)


# ---------------------------------------------------------------------------
# forward chain and reduced objective


def _chain(variant, mu, s, r):
    # elimination order E1 -> C1 -> E2 -> C2; works elementwise on arrays
    e1 = 1 - mu + r[1]
    c1 = (1 - e1) * (1 - s) - mu**2 + r[0]
    p2 = (1 - e1) * s
    e2 = (p2 if variant.flies_from_stock else mu * s) + r[3]
    base = p2 if variant.consumption_from_stock else mu * s
    c2 = (1 - e2) * base + r[2]
    return c1, c2, e1, e2, p2


def evaluate_chain(variant: Formulation, d: Decision, offsets: Offsets = None) -> StateVector:
    """State implied by a decision; values may be negative (see :func:`chain_feasible`)."""
    c1, c2, e1, e2, p2 = _chain(variant, float(d.mu), float(d.s), as_offsets(offsets))
    return StateVector(c1=c1, c2=c2, e1=e1, e2=e2, p2=p2)


def in_box(d: Decision) -> bool:
    return 0.0 <= d.mu <= 1.0 and 0.0 <= d.s <= 1.0


def is_feasible(d: Decision) -> bool:
    """Box bounds and ``mu(1 - s) - mu**2 >= 0`` (the zero-offset domain)."""
    return in_box(d) and d.mu * (1 - d.s) - d.mu**2 >= 0


def chain_feasible(variant: Formulation, d: Decision, offsets: Offsets = None, strict: bool = False) -> bool:
    """Feasibility under offsets: box bounds plus nonnegative consumption on the chain."""
    if not in_box(d):
        return False
    st = evaluate_chain(variant, d, offsets)
    if strict:
        return st.c1 > 0 and st.c2 > 0
    return st.c1 >= 0 and st.c2 >= 0


def reduced_objective(variant: Formulation, d: Decision, offsets: Offsets = None) -> float:
    """``sqrt(c1) + sqrt(c2)`` along the chain; raises DomainError if either is negative."""
    st = evaluate_chain(variant, d, offsets)
    if st.c1 < 0 or st.c2 < 0:
        raise DomainError(f"negative consumption at mu={d.mu}, s={d.s}: c1={st.c1}, c2={st.c2}")
    return float(np.sqrt(st.c1) + np.sqrt(st.c2))


def reduced_gradient_hessian(variant: Formulation, d: Decision, offsets: Offsets = None):
    """Analytic gradient and Hessian of the reduced objective in ``(mu, s)``.

    Each intermediate quantity is carried as (value, gradient, Hessian) and
    combined by the product rule.
    """
    r = as_offsets(offsets)
    mu, s = float(d.mu), float(d.s)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])

    a = mu - r[1]  # 1 - e1, da/dmu = 1
    c1 = a * (1 - s) - mu**2 + r[0]
    c1_g = np.array([(1 - s) - 2 * mu, -a])
    c1_h = np.array([[-2.0, -1.0], [-1.0, 0.0]])

    # mu*s and (1 - e1)*s share the same mixed second derivative
    prod_direct = (mu * s, np.array([s, mu]), swap)
    prod_stock = (a * s, np.array([s, a]), swap)

    e2, e2_g, e2_h = prod_stock if variant.flies_from_stock else prod_direct
    e2 = e2 + r[3]
    w, w_g, w_h = prod_stock if variant.consumption_from_stock else prod_direct

    c2 = (1 - e2) * w + r[2]
    c2_g = (1 - e2) * w_g - w * e2_g
    c2_h = (1 - e2) * w_h - w * e2_h - np.outer(e2_g, w_g) - np.outer(w_g, e2_g)

    if c1 <= 0 or c2 <= 0:
        raise DomainError(f"derivatives need c1 > 0 and c2 > 0, got c1={c1}, c2={c2}")

    grad = np.zeros(2)
    hess = np.zeros((2, 2))
    for c, cg, ch in ((c1, c1_g, c1_h), (c2, c2_g, c2_h)):
        root = np.sqrt(c)
        grad += cg / (2 * root)
        hess += ch / (2 * root) - np.outer(cg, cg) / (4 * c * root)
    return grad, 0.5 * (hess + hess.T)


def objective_on_grid(variant: Formulation, mu, s, offsets: Offsets = None) -> np.ndarray:
    """Vectorized reduced objective; NaN where c1 < 0 or c2 < 0."""
    c1, c2, *_ = _chain(variant, np.asarray(mu, dtype=float), np.asarray(s, dtype=float), as_offsets(offsets))
    ok = (c1 >= 0) & (c2 >= 0)
    with np.errstate(invalid="ignore"):
        f = np.sqrt(c1) + np.sqrt(c2)
    return np.where(ok, f, np.nan)


def grid_argmax(variant: Formulation, offsets: Offsets, n: int, chunk: int = 256) -> tuple[Decision, float]:
    """Best cell-centre ``((i + .5)/n, (j + .5)/n)`` of an ``n x n`` grid.

    ``i`` indexes ``mu``, ``j`` indexes ``s``; infeasible cells are skipped and
    ties go to the lowest ``(i, j)`` in row-major order.
    """
    if n < 2:
        raise ValueError(f"grid resolution must be >= 2, got {n}")
    r = as_offsets(offsets)
    centres = (np.arange(n) + 0.5) / n
    best_val, best_ij = -np.inf, None
    for start in range(0, n, chunk):
        mu = centres[start:start + chunk, None]
        f = objective_on_grid(variant, mu, centres[None, :], r)
        if np.all(np.isnan(f)):
            continue
        k = int(np.nanargmax(f))
        i, j = divmod(k, n)
        if f[i, j] > best_val:
            best_val, best_ij = float(f[i, j]), (start + i, j)
    if best_ij is None:
        raise InfeasibleError(f"no feasible grid point (n={n}, offsets={r.tolist()})")
    i, j = best_ij
    return Decision(float(centres[i]), float(centres[j])), best_val
