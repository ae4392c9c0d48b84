"""Shadow prices checked by re-solving perturbed problems.

Nothing here reads the recovered multipliers: the optimal value ``V*(r)``
is re-solved at shifted right-hand sides and differenced directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .nlp import CONSTRAINT_NAMES
from .orchard import Decision, Formulation, Offsets, as_offsets, grid_argmax
from .solver import SolveOptions, solve


@dataclass(frozen=True)
class FdEstimate:
    name: str
    eps: float
    value: float
    v_plus: float
    v_minus: float


def optimal_value(variant: Formulation, offsets: Offsets = None, opts: SolveOptions | None = None) -> float:
    return solve(variant, offsets, opts).objective


def _unit(name):
    u = np.zeros(4)
    u[CONSTRAINT_NAMES.index(name)] = 1.0
    return u


def fd_shadow_price(
    variant: Formulation,
    name: str,
    eps: float = 1e-3,
    base_offsets: Offsets = None,
    opts: SolveOptions | None = None,
) -> FdEstimate:
    """Central difference ``(V*(r + eps e_j) - V*(r - eps e_j)) / (2 eps)``."""
    if name not in CONSTRAINT_NAMES:
        raise KeyError(f"unknown constraint {name!r}; expected one of {CONSTRAINT_NAMES}")
    if not 1e-6 <= eps <= 1e-2:
        raise ValueError(f"eps must lie in [1e-6, 1e-2], got {eps}")
    base = as_offsets(base_offsets)
    u = _unit(name)
    with ThreadPoolExecutor(max_workers=2) as pool:
        plus, minus = pool.map(lambda r: optimal_value(variant, r, opts), (base + eps * u, base - eps * u))
    return FdEstimate(name, eps, (plus - minus) / (2 * eps), plus, minus)


def richardson_shadow_price(
    variant: Formulation,
    name: str,
    eps_coarse: float = 1e-2,
    eps_fine: float = 1e-3,
    base_offsets: Offsets = None,
    opts: SolveOptions | None = None,
) -> float:
    """Cancel the O(eps^2) term of two central differences."""
    coarse = fd_shadow_price(variant, name, eps_coarse, base_offsets, opts).value
    fine = fd_shadow_price(variant, name, eps_fine, base_offsets, opts).value
    ratio2 = (eps_coarse / eps_fine) ** 2
    return fine + (fine - coarse) / (ratio2 - 1)


def compensation_delta(variant: Formulation, x: float, delta: float, opts: SolveOptions | None = None) -> float:
    """Change in optimal utility when ``delta`` flies and ``x * delta`` consumption are added together.

    The flies go on the right-hand side of E1, the consumption on C1. The
    base value is re-solved here with the same options.
    """
    if delta == 0:
        return 0.0
    joint = {"C1": x * delta, "E1": delta}
    return optimal_value(variant, joint, opts) - optimal_value(variant, None, opts)


@dataclass(frozen=True)
class CompensationSweep:
    x: float
    deltas: tuple[float, ...]
    delta_v: tuple[float, ...]
    # |dV| / delta^2 for each delta
    curvature: tuple[float, ...]
    # successive curvature ratios; empty when every |dV| is at the noise floor
    ratios: tuple[float, ...]
    noise_floor: float

    @property
    def exact(self) -> bool:
        """True when the compensation leaves utility unchanged to round-off at every delta."""
        return max(abs(v) for v in self.delta_v) <= self.noise_floor

    @property
    def quadratic(self) -> bool:
        """Successive ``|dV|/delta**2`` ratios stay within [0.25, 4].

        Linear decay gives a ratio of 2 and passes too, so pair this with a
        bound on ``|dV|`` itself.
        """
        return self.exact or all(0.25 <= q <= 4.0 for q in self.ratios)


def compensation_sweep(
    variant: Formulation,
    x: float,
    deltas=(4e-3, 2e-3, 1e-3, 5e-4),
    noise_floor: float = 1e-12,
    opts: SolveOptions | None = None,
) -> CompensationSweep:
    """Check that ``|dV(delta)|`` shrinks like ``delta**2`` as delta halves."""
    dv = tuple(compensation_delta(variant, x, d, opts) for d in deltas)
    curv = tuple(abs(v) / d**2 for v, d in zip(dv, deltas))
    if max(abs(v) for v in dv) <= noise_floor:
        ratios = ()
    else:
        ratios = tuple(b / a if a > 0 else np.inf for a, b in zip(curv, curv[1:]))
    return CompensationSweep(float(x), tuple(deltas), dv, curv, ratios, noise_floor)


def brute_force_optimum(variant: Formulation, offsets: Offsets = None, n: int = 4096) -> tuple[Decision, float]:
    """Exhaustive ``n x n`` cell-centred grid maximum, independent of Newton."""
    return grid_argmax(variant, offsets, n)
