"""Continuous utility games: DR-submodular diagnostics, PoA bounds and distributed maximization."""

from .dynamics import RunConfig, Trace, d_no_regret, frank_wolfe, grid_max, random_baseline, to_distribution
from .functions import BoxRegion, PropertyReport, SocialFunction, curvature
from .games import ContinuousGame, EmpiricalDistribution, marginal_game, poa_bound
from .instances import (
    budget_curvature_bound,
    load_instance,
    random_affine_sensor,
    random_budget_game,
    random_sensor,
    save_instance,
    sensor_alpha,
)
from .vectorspace import BudgetPolytope, hit_and_run, lmo, project

__all__ = [
    "BoxRegion",
    "BudgetPolytope",
    "ContinuousGame",
    "EmpiricalDistribution",
    "PropertyReport",
    "RunConfig",
    "SocialFunction",
    "Trace",
    "budget_curvature_bound",
    "curvature",
    "d_no_regret",
    "frank_wolfe",
    "grid_max",
    "hit_and_run",
    "lmo",
    "load_instance",
    "marginal_game",
    "poa_bound",
    "project",
    "random_affine_sensor",
    "random_baseline",
    "random_budget_game",
    "random_sensor",
    "save_instance",
    "sensor_alpha",
    "to_distribution",
]
