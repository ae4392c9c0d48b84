import dataclasses
import math

import numpy as np
import pytest

from oracles import MU_STAR, S_STAR, V_STAR, brute_grid, f_base
from shadowprice import (
    ConvergenceError,
    Decision,
    EqualityConstraint,
    Formulation,
    InfeasibleError,
    MultiplierSet,
    RankDeficiencyError,
    SolveOptions,
    build_problem,
    evaluate_chain,
    foc_report,
    grid_seed,
    recover_multipliers,
    reduced_objective,
    solve,
)
from shadowprice.solver import FOC_KEYS, lagrangian_gradient, lagrangian_gradient_base, newton_maximize

ALL = list(Formulation)
# accepted steps never lose more than round-off in the objective
ULP_SLACK = 4 * np.finfo(float).eps


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(grid_n=1)
    with pytest.raises(ValueError):
        SolveOptions(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        SolveOptions(tol_grad=0)


@pytest.mark.parametrize("variant", ALL)
def test_grid_seed_close_to_optimum(variant):
    d = grid_seed(variant, None, 256)
    assert abs(d.mu - 0.5) <= 1 / 256 and abs(d.s - 0.206) <= 1 / 256


def test_grid_seed_matches_loop_oracle():
    for n in (2, 3, 17, 64):
        (mu, s), _ = brute_grid(f_base, n)
        d = grid_seed(Formulation.BASE, None, n)
        assert (d.mu, d.s) == (mu, s)


def test_grid_seed_n2():
    # the four centres: (.25,.25) -> 0.5956, (.75,.25) and (.25,.75) -> 0.3903, (.75,.75) infeasible
    assert grid_seed(Formulation.BASE, None, 2) == Decision(0.25, 0.25)


def test_grid_seed_infeasible():
    with pytest.raises(InfeasibleError):
        grid_seed(Formulation.BASE, {"C1": -2.0}, 16)


def test_solve_base():
    sol = solve(Formulation.BASE)
    assert sol.decision.mu == pytest.approx(0.5, abs=1e-3)
    assert sol.decision.s == pytest.approx(0.206, abs=1e-3)
    assert sol.stationarity_residual_inf <= 1e-8
    assert sol.constraint_residual_inf <= 1e-12
    assert sol.grad_inf <= 1e-12
    # closed-form optimum
    assert sol.decision.mu == pytest.approx(MU_STAR, abs=1e-12)
    assert sol.decision.s == pytest.approx(S_STAR, abs=1e-12)
    assert sol.objective == pytest.approx(V_STAR, abs=1e-14)


def test_solve_interior(solutions):
    for sol in solutions.values():
        st = sol.state
        assert st.c1 > 0 and st.c2 > 0
        d = sol.decision
        assert 0 < d.mu < 1 and 0 < d.s < 1 and 1 - d.s > d.mu


def test_variants_share_optimum(solutions):
    base = solutions[Formulation.BASE]
    for sol in solutions.values():
        assert sol.decision.mu == pytest.approx(base.decision.mu, abs=1e-9)
        assert sol.decision.s == pytest.approx(base.decision.s, abs=1e-9)
        assert sol.objective == pytest.approx(base.objective, abs=1e-9)


def test_base_multipliers_near_rounded_optimum(base_solution):
    # closed forms evaluated at the rounded optimum (mu, s) = (0.5, 0.206)
    lam1 = 1 / (2 * math.sqrt(0.147))
    m = base_solution.multipliers
    assert lam1 == pytest.approx(1.3041, abs=1e-4)
    assert m.lambda1 == pytest.approx(1.3041, abs=1e-3)
    assert m.xi1 == pytest.approx(-lam1 * 0.794, abs=1e-3)
    assert m.xi1 == pytest.approx(-1.0355, abs=1e-3)


def test_closed_form_multiplier_identities(base_solution):
    m = base_solution.multipliers
    st, d = base_solution.state, base_solution.decision
    assert m.lambda1 == pytest.approx(1 / (2 * math.sqrt(st.c1)), abs=1e-9)
    assert m.lambda2 == pytest.approx(1 / (2 * math.sqrt(st.c2)), abs=1e-9)
    assert m.xi1 == pytest.approx(-m.lambda1 * (1 - d.s), abs=1e-9)
    assert m.xi2 == pytest.approx(-m.lambda2 * d.mu * d.s, abs=1e-9)


def test_recover_multipliers_off_optimum():
    d = Decision(0.4, 0.3)
    z = evaluate_chain(Formulation.BASE, d).point(d)
    _, res = recover_multipliers(build_problem(Formulation.BASE), z)
    assert res > 1e-3


def test_recover_multipliers_least_squares_oracle(rng):
    # agrees with an SVD-based least-squares solve
    for variant in ALL:
        p = build_problem(variant)
        d = Decision(0.35, 0.25)
        z = evaluate_chain(variant, d).point(d)
        m, res = recover_multipliers(p, z)
        ref, *_ = np.linalg.lstsq(p.jacobian(z), p.objective_gradient(z), rcond=None)
        np.testing.assert_allclose(m.as_array(), ref, rtol=1e-12, atol=1e-12)
        assert res == pytest.approx(np.max(np.abs(p.objective_gradient(z) - p.jacobian(z) @ ref)), rel=1e-9)


def test_recover_multipliers_rank_deficient():
    # the orchard Jacobian is always full rank, so duplicate a constraint gradient
    base = build_problem(Formulation.BASE)
    e1 = base.constraint("E1")
    eqs = base.equalities[:3] + (EqualityConstraint("E2", e1.residual, e1.gradient),)
    p = dataclasses.replace(base, equalities=eqs)
    with pytest.raises(RankDeficiencyError):
        recover_multipliers(p, solve(Formulation.BASE).point)


def test_orchard_jacobian_full_rank(rng):
    for variant in ALL:
        p = build_problem(variant)
        for _ in range(50):
            z = rng.uniform(-2, 2, 6)
            assert np.linalg.matrix_rank(p.jacobian(z)) == 4


def test_newton_converges_fast_near_optimum(rng):
    opts = SolveOptions(tol_grad=1e-12)
    for variant in ALL:
        for _ in range(10):
            start = Decision(MU_STAR + rng.uniform(-0.1, 0.1), S_STAR + rng.uniform(-0.1, 0.1))
            d, f, g, iters, hist = newton_maximize(variant, start, None, opts)
            assert g <= 1e-12 and iters <= 20
            assert np.all(np.diff(hist) >= -ULP_SLACK)


def test_unique_solution_from_distinct_seeds(rng):
    ref = solve(Formulation.BASE)
    seeds = [Decision(0.1, 0.1), Decision(0.8, 0.1), Decision(0.2, 0.7), Decision(0.05, 0.9), Decision(0.4, 0.55)]
    while len(seeds) < 10:
        mu, s = rng.uniform(0.02, 0.98, 2)
        if mu * (1 - s) - mu**2 > 1e-3:
            seeds.append(Decision(float(mu), float(s)))
    for seed in seeds:
        sol = solve(Formulation.BASE, start=seed)
        assert sol.decision.mu == pytest.approx(ref.decision.mu, abs=1e-9)
        assert sol.decision.s == pytest.approx(ref.decision.s, abs=1e-9)
        assert np.all(np.diff(sol.history) >= -ULP_SLACK)


def test_solve_with_offsets_is_stationary():
    sol = solve(Formulation.STOCK_CONSUMPTION, {"C1": 0.01, "E1": -0.005, "C2": 0.002, "E2": 0.003})
    assert sol.stationarity_residual_inf <= 1e-8
    assert sol.constraint_residual_inf <= 1e-12


def test_non_convergence_reports_best_iterate():
    with pytest.raises(ConvergenceError) as info:
        solve(Formulation.BASE, opts=SolveOptions(max_iter=1, grid_n=4))
    err = info.value
    assert err.decision is not None and err.iterations == 1
    assert err.grad_inf > 1e-12
    assert err.objective == pytest.approx(reduced_objective(Formulation.BASE, err.decision))
    assert err.to_dict()["error"] == "convergence"


def test_foc_report_at_optimum(solutions):
    for sol in solutions.values():
        rep = foc_report(sol)
        assert tuple(rep) == FOC_KEYS
        assert max(abs(v) for v in rep.values()) <= 1e-8


def test_foc_specialized_matches_generic(rng):
    p = build_problem(Formulation.BASE)
    for _ in range(20):
        mu, s = rng.uniform(0.1, 0.6), rng.uniform(0.05, 0.3)
        z = np.array([mu, s, *rng.uniform(0.05, 0.5, 2), *rng.uniform(0, 1, 2)])
        m = MultiplierSet.from_array(rng.normal(size=4))
        np.testing.assert_allclose(lagrangian_gradient_base(z, m), lagrangian_gradient(p, z, m), rtol=0, atol=1e-12)


def test_foc_with_xi2_zeroed(base_solution):
    m = base_solution.multipliers
    probe = MultiplierSet(m.lambda1, m.xi1, m.lambda2, 0.0)
    rep = foc_report(base_solution, probe)
    d = base_solution.decision
    assert rep["dL/de2"] == pytest.approx(abs(m.lambda2 * d.mu * d.s), abs=1e-12)
    assert rep["dL/de2"] == pytest.approx(m.lambda2 * 0.103, abs=1e-3)
