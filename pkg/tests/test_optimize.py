import math

import numpy as np
import pytest

from geocluster import (
    CorrelationModel,
    CostModel,
    DensityModel,
    InfeasibleError,
    ValidationError,
    get_preset,
    objective,
    optimize,
)
from geocluster.optimize import design_cost

EXP_SIMPLE = get_preset("exponential", "simple")
BUDGET_CASE = dict(
    model=CorrelationModel("exponential", 10.0, 0.5),
    spec=EXP_SIMPLE,
    density=DensityModel(15.0),
    cost=CostModel(cm=30, cn=50, C=25_000, j_max=20),
)


def _oracle_ess(J, m, N, rho, r, r0, spec):
    """Closed-form objective written out independently."""
    n = N / J
    R = r0 * math.sqrt(m)
    q = r / R if spec.sampling == "simple" else r / (math.sqrt(R) + R / n)
    a = spec.coeffs
    if spec.form == "algebraic":
        s = 1 - 1 / (1 + a[0] * q ** a[1])
    else:
        s = a[0] * math.tanh(a[1] * q ** a[2])
    return J * n / (1 + rho * (n - 1) * s)


def _grid_oracle(model, spec, density, cost, m_max, p_points=10_000):
    """Brute force over J, m and a p-grid with N = round(J m p)."""
    best = (-1.0, None)
    p_grid = np.arange(1, p_points + 1) / p_points
    for J in range(cost.j_min, cost.j_max + 1):
        for m in range(1, m_max + 1):
            for N in sorted({int(round(J * m * p)) for p in p_grid}):
                if N < J or J * m * cost.cm + N * cost.cn > cost.C:
                    continue
                e = _oracle_ess(J, m, N, model.rho, model.r, density.r0, spec)
                if e > best[0]:
                    best = (e, (J, m, N))
    return best


def test_objective_rho_zero():
    model = CorrelationModel("exponential", 10.0, 0.0)
    assert objective(3, 12, 0.5, model, EXP_SIMPLE, DensityModel(15.0)) == pytest.approx(18.0)


def test_objective_worked_example():
    model = CorrelationModel("gaussian", 0.5, 0.3)
    value = objective(1, 20, 1.0, model, get_preset("gaussian", "spatial"), DensityModel(1 / math.sqrt(20)))
    assert value == pytest.approx(10.78, abs=0.01)


def test_objective_budget_case_point():
    value = objective(20, 16, 1.0, BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"])
    assert value == pytest.approx(215, rel=0.02)
    # that design overspends the budget
    assert design_cost(20, 16, 320, BUDGET_CASE["cost"]) == 25_600


def test_objective_errors():
    m, d = BUDGET_CASE["model"], BUDGET_CASE["density"]
    with pytest.raises(ValidationError):
        objective(2, 10, 0.05, m, EXP_SIMPLE, d)
    with pytest.raises(ValidationError):
        objective(2, 10, 1.5, m, EXP_SIMPLE, d)
    with pytest.raises(ValidationError):
        objective(2, 10, 0.5, m, get_preset("gaussian", "simple"), d)


def test_budget_case():
    sol = optimize(**BUDGET_CASE)
    c = BUDGET_CASE["cost"]
    assert sol.feasible and sol.cost <= c.C
    assert sol.J * sol.m * c.cm + sol.N * c.cn == sol.cost
    assert sol.N == round(sol.J * sol.m * sol.p)
    assert sol.ess >= 210
    assert sol.ess == pytest.approx(215, rel=0.05)


def test_budget_case_matches_grid_oracle():
    sol = optimize(**BUDGET_CASE)
    ess, _ = _grid_oracle(**BUDGET_CASE, m_max=30, p_points=2000)
    assert sol.ess >= (1 - 1e-6) * ess


@pytest.mark.parametrize("sampling", ["simple", "spatial"])
def test_toy_grid_oracle(sampling):
    family = "exponential" if sampling == "simple" else "gaussian"
    spec = get_preset(family, sampling)
    model = CorrelationModel(family, 4.0, 0.4)
    density = DensityModel(2.0)
    cost = CostModel(cm=3, cn=7, C=520, j_max=5)
    sol = optimize(model, spec, density, cost, m_cap=10)
    ess, (J, m, N) = _grid_oracle(model, spec, density, cost, m_max=10)
    assert sol.ess == pytest.approx(ess, rel=1e-12)


def test_rho_zero_maximises_surveys():
    model = CorrelationModel("exponential", 10.0, 0.0)
    sol = optimize(model, EXP_SIMPLE, DensityModel(15.0), CostModel(cm=1, cn=1, C=200, j_max=10))
    assert sol.ess == pytest.approx(100.0) and sol.N == 100 and sol.p == 1.0
    assert sol.cost <= 200


def test_monotone_in_budget_and_jmax():
    prev = 0.0
    for C in (5_000, 10_000, 15_000, 25_000, 40_000):
        sol = optimize(BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"], CostModel(30, 50, C, 20))
        assert sol.ess >= prev
        prev = sol.ess
    prev = 0.0
    for j_max in (1, 3, 8, 20, 30):
        sol = optimize(BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"], CostModel(30, 50, 25_000, j_max))
        assert sol.ess >= prev and sol.J <= j_max
        prev = sol.ess


def test_infeasible():
    with pytest.raises(InfeasibleError):
        optimize(BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"], CostModel(30, 50, 70, 5, j_min=2))


def test_survey_only_scope_needs_cap():
    cost = CostModel(10, 50, 20_000, 40)
    with pytest.raises(ValidationError):
        optimize(BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"], cost, budget_scope="survey-only")
    sol = optimize(BUDGET_CASE["model"], EXP_SIMPLE, BUDGET_CASE["density"], cost, budget_scope="survey-only", m_cap=15)
    assert sol.N * 50 <= 20_000 and sol.m <= 15


def test_cost_model_invariants():
    with pytest.raises(ValidationError):
        CostModel(-1, 1, 10, 2)
    with pytest.raises(ValidationError):
        CostModel(1, 1, 0, 2)
    with pytest.raises(ValidationError):
        CostModel(1, 1, 10, 2, j_min=3)
    with pytest.raises(ValidationError):
        DensityModel(0.0)
