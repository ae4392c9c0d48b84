"""Small equality-constrained maximization problems with right-hand-side offsets.

Every equality is stored as ``g(z) = r`` where ``g`` is written as
"defined variable minus defining expression" and ``r`` is the offset added
to the right-hand side. With the Lagrangian ``U(z) - sum_j m_j (g_j(z) - r_j)``
each multiplier ``m_j`` equals ``dV*/dr_j``, the shadow price of one extra
unit on the right-hand side of constraint ``j``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

CONSTRAINT_NAMES = ("C1", "E1", "C2", "E2")


@dataclass(frozen=True)
class VariableSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"variable names must be unique, got {self.names}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None


ORCHARD_SPACE = VariableSpace(("mu", "s", "c1", "c2", "e1", "e2"))


@dataclass(frozen=True)
class EqualityConstraint:
    """Constraint ``residual(z) = rhs_offset``.

    ``residual`` and ``gradient`` never see the offset; it is subtracted
    in :meth:`value`.
    """

    name: str
    residual: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    rhs_offset: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.rhs_offset):
            raise ValueError(f"rhs_offset of {self.name} must be finite")

    def value(self, z) -> float:
        return self.residual(z) - self.rhs_offset


@dataclass(frozen=True)
class InequalityConstraint:
    """Constraint ``fn(z) >= 0``. Used only as a domain guard; it never gets a multiplier."""

    name: str
    fn: Callable[[np.ndarray], float]

    def holds(self, z, strict: bool = False) -> bool:
        v = self.fn(z)
        return v > 0 if strict else v >= 0


@dataclass(frozen=True)
class Problem:
    space: VariableSpace
    objective: Callable[[np.ndarray], float]
    objective_gradient: Callable[[np.ndarray], np.ndarray]
    equalities: tuple[EqualityConstraint, ...]
    inequalities: tuple[InequalityConstraint, ...] = ()

    def __post_init__(self):
        names = tuple(c.name for c in self.equalities)
        if names != CONSTRAINT_NAMES:
            raise ValueError(f"expected equality constraints {CONSTRAINT_NAMES}, got {names}")

    def constraint(self, name: str) -> EqualityConstraint:
        for c in self.equalities:
            if c.name == name:
                return c
        raise KeyError(f"unknown constraint {name!r}; expected one of {CONSTRAINT_NAMES}")

    @property
    def offsets(self) -> np.ndarray:
        return np.array([c.rhs_offset for c in self.equalities])

    def jacobian(self, z) -> np.ndarray:
        """Constraint gradients as columns, shape ``(dim, 4)``."""
        return np.column_stack([c.gradient(z) for c in self.equalities])

    def inequalities_hold(self, z, strict: bool = False) -> bool:
        return all(h.holds(z, strict=strict) for h in self.inequalities)


@dataclass(frozen=True)
class MultiplierSet:
    """Multipliers for C1, E1, C2, E2, in that order."""

    lambda1: float
    xi1: float
    lambda2: float
    xi2: float

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "MultiplierSet":
        lambda1, xi1, lambda2, xi2 = (float(v) for v in values)
        return cls(lambda1, xi1, lambda2, xi2)

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.xi1, self.lambda2, self.xi2])

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    def __getitem__(self, name: str) -> float:
        return float(self.as_array()[CONSTRAINT_NAMES.index(name)])


def residual_vector(problem: Problem, z) -> np.ndarray:
    """``g_j(z) - r_j`` for C1, E1, C2, E2."""
    z = np.asarray(z, dtype=float)
    return np.array([c.value(z) for c in problem.equalities])


def stationarity_residual(problem: Problem, z, m: MultiplierSet) -> np.ndarray:
    """``grad U(z) - sum_j m_j grad g_j(z)``; zero at a regular interior optimum."""
    z = np.asarray(z, dtype=float)
    return problem.objective_gradient(z) - problem.jacobian(z) @ m.as_array()


def with_offset(problem: Problem, name: str, r: float) -> Problem:
    """Copy of ``problem`` with ``r`` added to the right-hand side of constraint ``name``."""
    if name not in CONSTRAINT_NAMES:
        raise KeyError(f"unknown constraint {name!r}; expected one of {CONSTRAINT_NAMES}")
    if not np.isfinite(r):
        raise ValueError("offset must be finite")
    equalities = tuple(
        dataclasses.replace(c, rhs_offset=c.rhs_offset + r) if c.name == name else c
        for c in problem.equalities
    )
    return dataclasses.replace(problem, equalities=equalities)
