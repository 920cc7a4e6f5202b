"""Effective sample size of geographic cluster designs under spatial
autocorrelation."""

from ._validation import (
    ComputationError,
    GeoclusterError,
    InfeasibleError,
    InhibitionInfeasibleError,
    ValidationError,
)
from .approx import (
    TABLE1,
    ApproxSpec,
    FitResult,
    MeanCorrelationRegressor,
    PresetTable,
    fit_approximation,
    get_preset,
    ratio_q,
    regenerate_table1,
    s_tilde,
    simulate_s,
    simulate_table,
)
from .correlation import CorrelationModel, VariogramParams, bessel_k1, correlation
from .elicitation import (
    DichotomousSpec,
    ElicitedDensity,
    averaged_ess,
    rho_dichotomous,
    rho_from_sd_ratio,
    sd_from_interval,
)
from .ess import (
    ClusterConfig,
    EssResult,
    cluster_ess,
    design_ess,
    ess_approx,
    ess_compound,
    ess_exact,
    mean_correlation,
)
from .geometry import (
    PointSet,
    Region,
    gen_regular,
    gen_uniform,
    pairwise_distances,
    sample_inhibited,
    simple_random_subsample,
)
from .optimize import CostModel, DensityModel, DesignSolution, objective, optimize
from .scenarios import (
    ScenarioConfig,
    ScenarioResult,
    compare_strategies,
    equivalent_sample_size,
    run_scenario,
    strategy_curve,
)

__all__ = [
    "ComputationError",
    "GeoclusterError",
    "InfeasibleError",
    "InhibitionInfeasibleError",
    "ValidationError",
    "TABLE1",
    "ApproxSpec",
    "FitResult",
    "MeanCorrelationRegressor",
    "PresetTable",
    "fit_approximation",
    "get_preset",
    "ratio_q",
    "regenerate_table1",
    "s_tilde",
    "simulate_s",
    "simulate_table",
    "CorrelationModel",
    "VariogramParams",
    "bessel_k1",
    "correlation",
    "DichotomousSpec",
    "ElicitedDensity",
    "averaged_ess",
    "rho_dichotomous",
    "rho_from_sd_ratio",
    "sd_from_interval",
    "ClusterConfig",
    "EssResult",
    "cluster_ess",
    "design_ess",
    "ess_approx",
    "ess_compound",
    "ess_exact",
    "mean_correlation",
    "PointSet",
    "Region",
    "gen_regular",
    "gen_uniform",
    "pairwise_distances",
    "sample_inhibited",
    "simple_random_subsample",
    "CostModel",
    "DensityModel",
    "DesignSolution",
    "objective",
    "optimize",
    "ScenarioConfig",
    "ScenarioResult",
    "compare_strategies",
    "equivalent_sample_size",
    "run_scenario",
    "strategy_curve",
]

__version__ = "0.1.0"
