"""Budget-constrained choice of cluster count, enumeration size and sampling
proportion.

A design enumerates ``m`` locations in each of ``J`` disc-shaped clusters and
surveys a proportion ``p`` of them, ``N = J m p`` surveys in total. The
cluster radius grows with the number of enumerated locations as
``R(m) = r0 * sqrt(m)``. Costs are ``cm`` per enumerated location and ``cn``
per survey.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import (
    InfeasibleError,
    ValidationError,
    check_choice,
    check_count,
    check_nonnegative,
    check_positive,
)
from .approx import s_tilde
from .correlation import CorrelationModel

__all__ = ["CostModel", "DensityModel", "DesignSolution", "objective", "optimize", "design_cost"]

BUDGET_SCOPES = ("total", "survey-only")


@dataclass(frozen=True)
class CostModel:
    cm: float
    cn: float
    C: float
    j_max: int
    j_min: int = 1

    def __post_init__(self):
        check_nonnegative(self.cm, "cm")
        check_nonnegative(self.cn, "cn")
        check_positive(self.C, "C")
        j_min = check_count(self.j_min, "j_min")
        j_max = check_count(self.j_max, "j_max")
        if j_min > j_max:
            raise ValidationError(f"need 1 <= j_min <= j_max, got j_min={j_min}, j_max={j_max}")


@dataclass(frozen=True)
class DensityModel:
    """Cluster radius ``R(m) = r0 * sqrt(m)``."""

    r0: float

    def __post_init__(self):
        check_positive(self.r0, "r0")

    def radius(self, m):
        return self.r0 * np.sqrt(m)


@dataclass(frozen=True)
class DesignSolution:
    J: int
    m: int
    p: float
    N: int
    ess: float
    cost: float
    feasible: bool = True

    def to_dict(self):
        return asdict(self)


def design_cost(J, m, N, cost, budget_scope="total"):
    """Spend of a design: enumeration plus surveys, or surveys only."""
    survey = N * cost.cn
    if budget_scope == "survey-only":
        return survey
    return J * m * cost.cm + survey


def _ess(J, m, n, model, spec, density):
    R = density.radius(m)
    if spec.sampling == "simple":
        q = model.r / R
    else:
        q = model.r / (np.sqrt(R) + R / n)
    s = np.asarray(s_tilde(spec, q))
    return J * n / (1.0 + model.rho * (n - 1.0) * s)


def objective(J, m, p, model, spec, density):
    """Approximate effective size ``J m p / (1 + rho (m p - 1) s~(q))``."""
    if not isinstance(model, CorrelationModel):
        raise ValidationError("model must be a CorrelationModel")
    if spec.family != model.family:
        raise ValidationError(f"approximation is for {spec.family!r}, model is {model.family!r}")
    if not J >= 1 or not m >= 1:
        raise ValidationError("J and m must be >= 1")
    if not 0 < p <= 1:
        raise ValidationError(f"p must satisfy 0 < p <= 1, got {p!r}")
    n = m * p
    if n < 1:
        raise ValidationError(f"n = m*p = {n:g} < 1 leaves an empty cluster sample")
    return float(_ess(J, m, n, model, spec, density))


def _m_limit(J, cost, budget_scope, m_cap):
    limit = m_cap
    if budget_scope == "total" and cost.cm > 0:
        # at least one survey per cluster
        by_budget = math.floor((cost.C - J * cost.cn) / (J * cost.cm) + 1e-12)
        limit = by_budget if limit is None else min(limit, by_budget)
    if limit is None:
        raise ValidationError("enumeration is free under this budget; set m_cap to bound m")
    return limit


def optimize(model, spec, density, cost, budget_scope="total", m_cap=None):
    """Exhaustively search integer designs for the largest approximate ESS.

    Every ``J`` in ``[j_min, j_max]`` and ``m`` up to the budget (or
    ``m_cap``) is scanned; for each pair every feasible survey count
    ``N = J .. min(J m, budget)`` is evaluated with ``p = N / (J m)``, so the
    returned design spends exactly ``J m cm + N cn`` and ``N = J m p`` holds
    without rounding. Ties go to the cheaper design, then the smaller ``J``.

    Raises
    ------
    InfeasibleError
        When even ``J = j_min, m = 1, p = 1`` exceeds the budget.
    """
    budget_scope = check_choice(budget_scope, BUDGET_SCOPES, "budget_scope")
    if m_cap is not None:
        m_cap = check_count(m_cap, "m_cap")
    if spec.family != model.family:
        raise ValidationError(f"approximation is for {spec.family!r}, model is {model.family!r}")
    smallest = design_cost(cost.j_min, 1, cost.j_min, cost, budget_scope)
    if smallest > cost.C:
        raise InfeasibleError(
            f"the smallest design (J={cost.j_min}, m=1, p=1) costs {smallest:g} > budget {cost.C:g}"
        )
    best = None  # (ess, cost, J, m, N)
    for J in range(cost.j_min, cost.j_max + 1):
        m_max = _m_limit(J, cost, budget_scope, m_cap)
        for m in range(1, m_max + 1):
            enum_cost = 0.0 if budget_scope == "survey-only" else J * m * cost.cm
            left = cost.C - enum_cost
            n_budget = J * m if cost.cn == 0 else math.floor(left / cost.cn + 1e-12)
            n_top = min(J * m, n_budget)
            if n_top < J:
                # fewer than one survey per cluster on average
                continue
            N = np.arange(J, n_top + 1)
            ess = _ess(J, m, N / J, model, spec, density)
            k = int(np.argmax(ess))  # first maximum, i.e. the cheapest N
            spent = enum_cost + N[k] * cost.cn
            cand = (float(ess[k]), spent, J, m, int(N[k]))
            if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                best = cand
    if best is None:
        raise InfeasibleError("no design with at least one survey per cluster fits the budget")
    ess, spent, J, m, N = best
    spent = float(spent)
    return DesignSolution(J=J, m=m, p=N / (J * m), N=N, ess=ess, cost=spent, feasible=bool(spent <= cost.C))
