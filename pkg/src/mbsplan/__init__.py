"""Capacity planning for cellular networks that mix static base stations
with a relocatable fleet of mobile ones.

The toolkit answers two questions in sequence: how many stations per km^2
each region needs in each time slot to hold a per-bit delay target
(stochastic-geometry model plus a utilization fixed point), and what split
between permanent stations and a shared mobile fleet covers that demand at
minimum cost (a small LP). Savings are reported against an all-static
build. See the ``cli`` module or ``mbsplan --help`` for the command-line
surface.
"""

# Set before the submodule imports: pipeline reads it at import time.
__version__ = "0.1.0"

from .scenario import (RadioParams, Region, Scenario, ScenarioError, SchemaError,
                       TrafficProfile, UserDensityMatrix, ValidationError,
                       default_config, default_scenario, load_scenario,
                       load_scenario_file, resample_profile, save_scenario,
                       scenario_to_config, slot_midpoints_h, synth_profile,
                       user_density_matrix, write_profile_csv)
from .qosmodel import (FixedPointDiverged, NonFinite, QosEvaluation, QuadratureSpec,
                       capacity, delay_given_utilization, evaluate_qos,
                       mc_delay_oracle, mean_interference, overlap_area,
                       pair_distance, shared_load_kernel)
from .dimensioning import (BISECTION_REL_TOL, DEFAULT_DENSITY_CAP_PER_M2,
                           CellDiagnostics, DemandMatrix, InfeasibleDemand,
                           NonMonotoneDetected, demand_matrix, min_bs_density,
                           static_only_deployment, write_demand_csv)
from .lpsolve import (INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LpSolution,
                      NumericalBreakdown, solve_lp)
from .allocation import (TIE_BREAK_EPSILON, CostModel, DeploymentPlan, SavingsReport,
                         Violation, build_allocation_lp, canonicalize_schedule,
                         optimal_plan, peak_aggregate_demand, plan_to_dict, savings,
                         savings_to_dict, verify_plan, write_series_csv)
from .pipeline import (RunArtifacts, SweepResult, ValidationCheck, ValidationReport,
                       run_pipeline, sweep_cost_ratio, sweep_density_ratio, validate,
                       worker_count, write_sweep_csv)

__all__ = [
    "__version__",
    # scenario
    "RadioParams", "Region", "Scenario", "ScenarioError", "SchemaError",
    "TrafficProfile", "UserDensityMatrix", "ValidationError", "default_config",
    "default_scenario", "load_scenario", "load_scenario_file", "resample_profile",
    "save_scenario", "scenario_to_config", "slot_midpoints_h", "synth_profile",
    "user_density_matrix", "write_profile_csv",
    # qos model
    "FixedPointDiverged", "NonFinite", "QosEvaluation", "QuadratureSpec",
    "capacity", "delay_given_utilization", "evaluate_qos", "mc_delay_oracle",
    "mean_interference", "overlap_area", "pair_distance", "shared_load_kernel",
    # dimensioning
    "BISECTION_REL_TOL", "DEFAULT_DENSITY_CAP_PER_M2", "CellDiagnostics",
    "DemandMatrix", "InfeasibleDemand", "NonMonotoneDetected", "demand_matrix",
    "min_bs_density", "static_only_deployment", "write_demand_csv",
    # lp solver
    "INFEASIBLE", "OPTIMAL", "UNBOUNDED", "LinearProgram", "LpSolution",
    "NumericalBreakdown", "solve_lp",
    # allocation
    "TIE_BREAK_EPSILON", "CostModel", "DeploymentPlan", "SavingsReport",
    "Violation", "build_allocation_lp", "canonicalize_schedule", "optimal_plan",
    "peak_aggregate_demand", "plan_to_dict", "savings", "savings_to_dict",
    "verify_plan", "write_series_csv",
    # pipeline / cli
    "RunArtifacts", "SweepResult", "ValidationCheck", "ValidationReport",
    "run_pipeline", "sweep_cost_ratio", "sweep_density_ratio", "validate",
    "worker_count", "write_sweep_csv",
]
