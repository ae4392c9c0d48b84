"""Shadow-price cost estimates versus the optimal marginal cost of control.

A two-period fruit-storage utility problem is solved under four equivalent
formulations. For each one the Lagrange multipliers are recovered and the
ratio ``-xi1 / lambda1`` is compared with the marginal treatment cost
actually paid at the optimum.
"""

from .audit import AuditReport, AuditRow, cost_estimate_x, surface_grid, table1, true_marginal_cost
from .exceptions import ConvergenceError, DomainError, InfeasibleError, RankDeficiencyError, ShadowPriceError
from .nlp import (
    CONSTRAINT_NAMES,
    EqualityConstraint,
    MultiplierSet,
    Problem,
    VariableSpace,
    residual_vector,
    stationarity_residual,
    with_offset,
)
from .orchard import (
    Decision,
    Formulation,
    StateVector,
    build_problem,
    evaluate_chain,
    is_feasible,
    reduced_gradient_hessian,
    reduced_objective,
)
from .sensitivity import (
    FdEstimate,
    brute_force_optimum,
    compensation_delta,
    compensation_sweep,
    fd_shadow_price,
    richardson_shadow_price,
)
from .solver import KktSolution, SolveOptions, foc_report, grid_seed, recover_multipliers, solve

__version__ = "0.1.0"
