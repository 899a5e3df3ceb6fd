"""Cost-optimal split of capacity between static stations and a shared
mobile fleet.

Given the per-slot, per-region minimum station densities produced by the
dimensioning stage, this module builds and solves the deployment LP:

    minimize  c_m * M  +  c_s * sum_z lambda_s[z] * A[z]
    s.t.      sum_z mbs[j, z] * A[z] == M                  (closed fleet)
              lambda_s[z] + mbs[j, z] >= demand[j, z]      (coverage)
              0 <= mbs[j, z] <= cap[z],  0 <= lambda_s[z] <= cap[z]

where cap[z] is the worst-slot demand of region z (deploying more than the
peak is never useful). M is the fleet size: the same pool of mobile
stations serves every slot, redistributed between regions as traffic moves.

With equal unit costs the optimum value is pinned but the static/mobile
split is not; a tiny surcharge on the fleet makes the solver prefer static
capacity deterministically, and a canonicalization pass makes the per-slot
fleet allocation reproducible as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dimensioning import DemandMatrix
from .lpsolve import OPTIMAL, LinearProgram, solve_lp

# Relative surcharge on the fleet's unit cost used only inside the solver,
# so that ties between equally priced configurations resolve toward static
# stations. Reported objectives always use the caller's true costs.
TIE_BREAK_EPSILON = 1e-6

_CLOSED_TOL = 1e-8
_COVERAGE_TOL = 1e-8
_CAP_TOL = 1e-10


@dataclass(frozen=True)
class CostModel:
    """Unit CAPEX of a static station and of a mobile station."""

    static_unit_cost: float = 1.0
    mobile_unit_cost: float = 1.0

    def __post_init__(self):
        for name in ("static_unit_cost", "mobile_unit_cost"):
            value = float(getattr(self, name))
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class DeploymentPlan:
    """Solved deployment: per-region static densities plus the fleet schedule.

    ``static_density`` has one entry per region (stations/m^2);
    ``mbs_schedule`` is slots x regions (stations/m^2); ``fleet_size`` is the
    absolute number of mobile stations, identical in every slot.
    """

    static_density: np.ndarray
    mbs_schedule: np.ndarray
    fleet_size: float
    objective_value: float
    cost_model: CostModel

    def __post_init__(self):
        static = np.array(self.static_density, dtype=float)
        schedule = np.array(self.mbs_schedule, dtype=float)
        if static.ndim != 1:
            raise ValueError(f"static_density must be 1-D, got shape {static.shape}")
        if schedule.ndim != 2 or schedule.shape[1] != static.size:
            raise ValueError(
                f"mbs_schedule must be (slots, {static.size}), got {schedule.shape}"
            )
        if not (np.all(np.isfinite(static)) and np.all(np.isfinite(schedule))):
            raise ValueError("plan densities must be finite")
        if not math.isfinite(self.fleet_size) or self.fleet_size < 0.0:
            raise ValueError(f"fleet_size must be finite and >= 0, got {self.fleet_size}")
        static.setflags(write=False)
        schedule.setflags(write=False)
        object.__setattr__(self, "static_density", static)
        object.__setattr__(self, "mbs_schedule", schedule)
        object.__setattr__(self, "fleet_size", float(self.fleet_size))
        object.__setattr__(self, "objective_value", float(self.objective_value))

    @property
    def num_slots(self) -> int:
        return self.mbs_schedule.shape[0]

    @property
    def num_regions(self) -> int:
        return self.static_density.size

    @property
    def fleet_size_ceil(self) -> int:
        """Fleet size rounded up to whole vehicles, forgiving float dust."""
        return int(math.ceil(self.fleet_size - 1e-9 * (1.0 + abs(self.fleet_size))))


@dataclass(frozen=True)
class SavingsReport:
    """Comparison of the hybrid optimum against a static-only deployment.

    Totals are absolute station counts; the series are slots x regions with
    excess capacity in stations/m^2 and the fleet fraction dimensionless.
    """

    static_only_total: float
    hybrid_total: float
    total_saving_fraction: float
    per_region_static_saving_fraction: np.ndarray
    peak_aggregate_demand: float
    excess_capacity_series: np.ndarray
    mbs_fraction_series: np.ndarray

    def __post_init__(self):
        per_region = np.array(self.per_region_static_saving_fraction, dtype=float)
        excess = np.array(self.excess_capacity_series, dtype=float)
        fraction = np.array(self.mbs_fraction_series, dtype=float)
        for arr in (per_region, excess, fraction):
            arr.setflags(write=False)
        object.__setattr__(self, "per_region_static_saving_fraction", per_region)
        object.__setattr__(self, "excess_capacity_series", excess)
        object.__setattr__(self, "mbs_fraction_series", fraction)


@dataclass(frozen=True)
class Violation:
    """One failed feasibility check: which constraint, where, by how much."""

    constraint: str
    slot: int | None
    region: int | None
    magnitude: float


def _demand_values(demand) -> np.ndarray:
    values = demand.values if isinstance(demand, DemandMatrix) else np.asarray(demand, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"demand must be a slots x regions matrix, got shape {values.shape}")
    if values.size == 0 or np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("demand must be non-empty, finite and non-negative")
    return values


def _areas(areas_m2, num_regions) -> np.ndarray:
    areas = np.atleast_1d(np.asarray(areas_m2, dtype=float))
    if areas.shape != (num_regions,):
        raise ValueError(f"areas must have shape ({num_regions},), got {areas.shape}")
    if np.any(areas <= 0.0) or not np.all(np.isfinite(areas)):
        raise ValueError("region areas must be positive and finite")
    return areas


def build_allocation_lp(demand, areas_m2, costs: CostModel = CostModel()) -> LinearProgram:
    """Assemble the deployment LP.

    Variable order: [M, static per region, schedule slot-major], i.e. index
    1 + Z + j*Z + z holds the slot-j mobile density of region z.
    """
    values = _demand_values(demand)
    n_slots, n_regions = values.shape
    areas = _areas(areas_m2, n_regions)
    caps = values.max(axis=0)

    n_vars = 1 + n_regions + n_slots * n_regions
    objective = np.zeros(n_vars)
    objective[0] = costs.mobile_unit_cost
    objective[1:1 + n_regions] = costs.static_unit_cost * areas

    # Closed fleet: sum_z A_z * mbs[j, z] - M = 0 for every slot.
    a_eq = np.zeros((n_slots, n_vars))
    a_eq[:, 0] = -1.0
    for j in range(n_slots):
        a_eq[j, 1 + n_regions + j * n_regions:1 + n_regions + (j + 1) * n_regions] = areas
    b_eq = np.zeros(n_slots)

    # Coverage: -static[z] - mbs[j, z] <= -demand[j, z], slot-major rows.
    a_ub = np.zeros((n_slots * n_regions, n_vars))
    b_ub = np.empty(n_slots * n_regions)
    for j in range(n_slots):
        for z in range(n_regions):
            row = j * n_regions + z
            a_ub[row, 1 + z] = -1.0
            a_ub[row, 1 + n_regions + row] = -1.0
            b_ub[row] = -values[j, z]

    bounds = [(0.0, math.inf)]
    bounds += [(0.0, float(caps[z])) for z in range(n_regions)]
    for _ in range(n_slots):
        bounds += [(0.0, float(caps[z])) for z in range(n_regions)]
    return LinearProgram(objective=objective, a_eq=a_eq, b_eq=b_eq,
                         a_ub=a_ub, b_ub=b_ub, bounds=bounds)


def canonicalize_schedule(raw_plan: DeploymentPlan, demand, areas_m2) -> DeploymentPlan:
    """Rebuild the fleet schedule in a solver-independent way.

    The LP pins the fleet size but usually not how it is split between
    regions slot by slot. The canonical split first parks in each region
    exactly what coverage requires beyond its static stations, then spreads
    the leftover fleet proportionally to each region's remaining headroom
    (peak demand minus the required density). Objective and feasibility are
    unchanged.
    """
    values = _demand_values(demand)
    n_slots, n_regions = values.shape
    areas = _areas(areas_m2, n_regions)
    caps = values.max(axis=0)
    static = raw_plan.static_density
    fleet = raw_plan.fleet_size

    schedule = np.empty((n_slots, n_regions))
    for j in range(n_slots):
        required = np.maximum(0.0, values[j] - static)
        leftover = fleet - float(required @ areas)
        headroom = np.maximum(0.0, caps - required)
        weights = headroom * areas
        total = float(weights.sum())
        if leftover > 0.0 and total > 0.0:
            # share_z / A_z <= headroom_z because leftover <= sum(weights).
            schedule[j] = required + leftover * headroom / total
        else:
            schedule[j] = required
    return DeploymentPlan(static_density=static, mbs_schedule=schedule,
                          fleet_size=fleet, objective_value=raw_plan.objective_value,
                          cost_model=raw_plan.cost_model)


def optimal_plan(demand, areas_m2, costs: CostModel = CostModel()) -> DeploymentPlan:
    """Solve the deployment LP and return the canonicalized optimum."""
    values = _demand_values(demand)
    n_slots, n_regions = values.shape
    areas = _areas(areas_m2, n_regions)

    biased = CostModel(static_unit_cost=costs.static_unit_cost,
                       mobile_unit_cost=costs.mobile_unit_cost * (1.0 + TIE_BREAK_EPSILON))
    solution = solve_lp(build_allocation_lp(values, areas, biased))
    if solution.status != OPTIMAL:
        # A fleet of zero with static densities at each region's peak is
        # always feasible, so any other status means the solver broke.
        raise RuntimeError(f"allocation LP reported '{solution.status}' on a "
                           f"feasible-by-construction instance")
    x = np.maximum(solution.variables, 0.0)  # clip solver dust at the origin

    fleet = float(x[0])
    static = x[1:1 + n_regions]
    schedule = x[1 + n_regions:].reshape(n_slots, n_regions)
    objective = costs.mobile_unit_cost * fleet + costs.static_unit_cost * float(static @ areas)
    raw = DeploymentPlan(static_density=static, mbs_schedule=schedule,
                         fleet_size=fleet, objective_value=objective, cost_model=costs)
    return canonicalize_schedule(raw, values, areas)


def peak_aggregate_demand(demand, areas_m2) -> float:
    """Largest single-slot station count summed over all regions."""
    values = _demand_values(demand)
    areas = _areas(areas_m2, values.shape[1])
    return float((values @ areas).max())


def savings(plan: DeploymentPlan, demand, areas_m2) -> SavingsReport:
    """Compare the plan's station counts against a per-region static-only build."""
    values = _demand_values(demand)
    areas = _areas(areas_m2, values.shape[1])
    caps = values.max(axis=0)

    static_only_total = float(caps @ areas)
    hybrid_total = plan.fleet_size + float(plan.static_density @ areas)
    if static_only_total > 0.0:
        total_saving = 1.0 - hybrid_total / static_only_total
    else:
        total_saving = 0.0  # empty network saves nothing by convention

    per_region = np.where(caps > 0.0, 1.0 - plan.static_density / np.where(caps > 0.0, caps, 1.0), 0.0)
    excess = plan.static_density[np.newaxis, :] + plan.mbs_schedule - values
    if plan.fleet_size > 0.0:
        fraction = plan.mbs_schedule * areas[np.newaxis, :] / plan.fleet_size
    else:
        fraction = np.zeros_like(plan.mbs_schedule)
    return SavingsReport(static_only_total=static_only_total,
                         hybrid_total=hybrid_total,
                         total_saving_fraction=float(total_saving),
                         per_region_static_saving_fraction=per_region,
                         peak_aggregate_demand=peak_aggregate_demand(values, areas),
                         excess_capacity_series=excess,
                         mbs_fraction_series=fraction)


def verify_plan(plan: DeploymentPlan, demand, areas_m2) -> list[Violation]:
    """Check every plan invariant; an empty list means the plan is feasible."""
    values = _demand_values(demand)
    n_slots, n_regions = values.shape
    areas = _areas(areas_m2, n_regions)
    caps = values.max(axis=0)
    out: list[Violation] = []

    closed_tol = _CLOSED_TOL * (1.0 + plan.fleet_size)
    for j in range(n_slots):
        err = abs(float(plan.mbs_schedule[j] @ areas) - plan.fleet_size)
        if err > closed_tol:
            out.append(Violation("closed_system", slot=j, region=None, magnitude=err))

    total = plan.static_density[np.newaxis, :] + plan.mbs_schedule
    for j in range(n_slots):
        for z in range(n_regions):
            shortfall = values[j, z] - total[j, z] - _COVERAGE_TOL * (1.0 + values[j, z])
            if shortfall > 0.0:
                out.append(Violation("coverage", slot=j, region=z, magnitude=shortfall))
            over = max(-plan.mbs_schedule[j, z], plan.mbs_schedule[j, z] - caps[z]) - _CAP_TOL
            if over > 0.0:
                out.append(Violation("mbs_cap", slot=j, region=z, magnitude=over))

    for z in range(n_regions):
        over = max(-plan.static_density[z], plan.static_density[z] - caps[z]) - _CAP_TOL
        if over > 0.0:
            out.append(Violation("static_cap", slot=None, region=z, magnitude=over))
    return out


# ---------------------------------------------------------------------------
# export helpers

def plan_to_dict(plan: DeploymentPlan, region_ids) -> dict:
    """JSON-ready view of a plan, densities converted to stations/km^2."""
    region_ids = list(region_ids)
    if len(region_ids) != plan.num_regions:
        raise ValueError(f"expected {plan.num_regions} region ids, got {len(region_ids)}")
    return {
        "fleet_size": plan.fleet_size,
        "fleet_size_ceil": plan.fleet_size_ceil,
        "static_density_per_km2": {
            rid: float(plan.static_density[z]) * 1e6 for z, rid in enumerate(region_ids)
        },
        "mbs_schedule_per_km2": [[float(v) * 1e6 for v in row] for row in plan.mbs_schedule],
        "objective_value": plan.objective_value,
        "cost_model": {
            "static_unit_cost": plan.cost_model.static_unit_cost,
            "mobile_unit_cost": plan.cost_model.mobile_unit_cost,
        },
        "tie_break_epsilon": TIE_BREAK_EPSILON,
    }


def savings_to_dict(report: SavingsReport, region_ids) -> dict:
    """JSON-ready view of a savings report (excess series in stations/km^2)."""
    region_ids = list(region_ids)
    per_region = report.per_region_static_saving_fraction
    if len(region_ids) != per_region.size:
        raise ValueError(f"expected {per_region.size} region ids, got {len(region_ids)}")
    return {
        "static_only_total": report.static_only_total,
        "hybrid_total": report.hybrid_total,
        "total_saving_fraction": report.total_saving_fraction,
        "per_region_static_saving_fraction": {
            rid: float(per_region[z]) for z, rid in enumerate(region_ids)
        },
        "peak_aggregate_demand": report.peak_aggregate_demand,
        "excess_capacity_per_km2": [[float(v) * 1e6 for v in row]
                                    for row in report.excess_capacity_series],
        "mbs_fraction": [[float(v) for v in row] for row in report.mbs_fraction_series],
    }


def write_series_csv(path, series, slot_times_h, region_ids) -> None:
    """Write one slots x regions series as ``slot,time_h,region_id,value``.

    Values are written exactly as passed; pick units before calling.
    """
    series = np.asarray(series, dtype=float)
    times = np.asarray(slot_times_h, dtype=float)
    region_ids = list(region_ids)
    n_slots, n_regions = series.shape
    if times.shape != (n_slots,) or len(region_ids) != n_regions:
        raise ValueError("series, slot_times_h and region_ids disagree on shape")
    lines = ["slot,time_h,region_id,value"]
    for j in range(n_slots):
        for z in range(n_regions):
            lines.append(f"{j},{float(times[j])!r},{region_ids[z]},{float(series[j, z])!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
