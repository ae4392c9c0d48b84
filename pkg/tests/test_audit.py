import dataclasses
import math

import numpy as np
import pytest

from oracles import V_STAR, central_gradient
from shadowprice import (
    DomainError,
    Formulation,
    MultiplierSet,
    cost_estimate_x,
    surface_grid,
    table1,
    true_marginal_cost,
)

F = Formulation
EXPECTED_X = {F.BASE: 0.794, F.STOCK_FLIES: 0.767, F.STOCK_CONSUMPTION: 1.027, F.STOCK_BOTH: 1.000}


@pytest.fixture(scope="module")
def report():
    return table1()


def test_cost_estimate_base(base_solution):
    x = cost_estimate_x(base_solution)
    assert x == pytest.approx(0.794, abs=1e-3)
    assert x == pytest.approx(1 - base_solution.decision.s, abs=1e-9)
    # exact optimum gives 2**(-1/3)
    assert x == pytest.approx(2 ** (-1 / 3), abs=1e-12)


def test_cost_estimate_stock_consumption(solutions):
    assert cost_estimate_x(solutions[F.STOCK_CONSUMPTION]) == pytest.approx(1.027, abs=1e-3)


def test_cost_estimate_degenerate(base_solution):
    bad = dataclasses.replace(base_solution, multipliers=MultiplierSet(0.0, -1.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        cost_estimate_x(bad)


def test_cost_estimate_ratio_invariance(base_solution):
    m = base_solution.multipliers
    x = cost_estimate_x(base_solution)
    for k in (1e-3, 0.5, 7.0, 1e4):
        scaled = dataclasses.replace(base_solution, multipliers=MultiplierSet(k * m.lambda1, k * m.xi1, m.lambda2, m.xi2))
        assert cost_estimate_x(scaled) == pytest.approx(x, abs=1e-12)


@pytest.mark.parametrize("mu,expected", [(0.5, 1.0), (0.3, 0.6), (1.0, 2.0)])
def test_true_marginal_cost(mu, expected):
    assert true_marginal_cost(mu) == pytest.approx(expected, abs=1e-15)


def test_true_marginal_cost_fd():
    # -g'(mu) / e1'(mu) by central differences of g(mu) = mu^2 and e1(mu) = 1 - mu
    for mu in (0.1, 0.5, 0.77):
        dg = central_gradient(lambda v: v[0] ** 2, [mu])[0]
        de1 = central_gradient(lambda v: 1 - v[0], [mu])[0]
        assert true_marginal_cost(mu) == pytest.approx(-dg / de1, abs=1e-8)


def test_table1_rows(report):
    assert [row.variant for row in report.rows] == list(Formulation)
    for row in report.rows:
        assert row.cost_estimate_x == pytest.approx(EXPECTED_X[row.variant], abs=1e-3)
        assert f"{row.cost_estimate_x:.3f}" == f"{EXPECTED_X[row.variant]:.3f}"
        assert row.deviation == pytest.approx(row.cost_estimate_x - report.true_marginal_cost)
    assert report.true_marginal_cost == pytest.approx(1.0, abs=1e-3)
    assert report.spread >= 0.2
    assert report.units == "$/ton"


def test_table1_fd_consistency(report):
    for row in report.rows:
        assert row.fd_cost_estimate == pytest.approx(row.cost_estimate_x, abs=2e-3)


def test_underestimate_for_base(report):
    x = report.estimates()[F.BASE]
    assert x < report.true_marginal_cost - 0.1


def test_three_way_ordering(report):
    xs = list(report.estimates().values())
    assert any(x < 1.0 - 1e-3 for x in xs)
    assert any(x > 1.0 + 1e-3 for x in xs)
    assert any(abs(x - 1.0) <= 1e-3 for x in xs)


def test_table1_without_fd():
    rep = table1(fd_eps=None)
    assert all(row.fd_cost_estimate is None for row in rep.rows)


def test_surface_layout():
    n = 4
    grid = surface_grid(n)
    assert grid.shape == ((n + 1) ** 2, 3)
    # mu runs fastest, then s
    np.testing.assert_array_equal(grid[: n + 1, 0], np.arange(n + 1) / n)
    np.testing.assert_array_equal(grid[: n + 1, 1], 0.0)
    np.testing.assert_array_equal(grid[n + 1, :2], [0.0, 1 / n])


def test_surface_values():
    grid = surface_grid(10)
    lookup = {(round(mu, 6), round(s, 6)): f for mu, s, f in grid}
    assert lookup[(0.5, 0.0)] == pytest.approx(0.5, abs=1e-15)
    assert math.isnan(lookup[(0.9, 0.5)])
    assert lookup[(0.0, 0.3)] == 0.0


def test_surface_maximum_bounded_by_optimum(base_solution):
    f = surface_grid(200)[:, 2]
    top = np.nanmax(f)
    assert base_solution.objective - 1e-3 <= top <= base_solution.objective
    assert top <= V_STAR


def test_surface_rejects_small_n():
    with pytest.raises(ValueError):
        surface_grid(1)
