"""End-to-end orchestration: scenario in, figure-ready artifacts out.

``run_pipeline`` chains the stages (traffic profiles -> user densities ->
minimum station densities -> deployment LP -> savings report) and writes
CSV/JSON artifacts suitable for plotting. The two parameter sweeps rerun
that chain while varying either the office/residential user-density ratio
or the static/mobile unit-cost ratio. ``validate`` replays the analytic
model against its Monte Carlo and grid-scan oracles.

All outputs are deterministic for a fixed config: floats are written with
``repr`` (shortest round-trip form), JSON keys are sorted, and nothing on
the optimization path draws random numbers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import (CostModel, DeploymentPlan, SavingsReport, optimal_plan,
                         plan_to_dict, savings, savings_to_dict, verify_plan)
from .dimensioning import DemandMatrix, demand_matrix, min_bs_density, write_demand_csv
from .qosmodel import QuadratureSpec, delay_given_utilization, evaluate_qos, mc_delay_oracle
from .scenario import (Scenario, UserDensityMatrix, default_config, default_scenario,
                       load_scenario_file, user_density_matrix)

# Spot checks used by ``validate``: (station density, user density) pairs in
# per-km^2 units for the Monte Carlo oracle, and user densities for the
# grid-scan cross-check of the dimensioning stage.
MC_SPOT_DENSITIES_PER_KM2 = ((10.0, 100.0), (30.0, 1000.0), (100.0, 10000.0))
GRID_SPOT_USER_DENSITIES_PER_KM2 = (100.0, 1000.0, 10000.0)
_GRID_POINTS = 2000
_GRID_LO_PER_KM2 = 1e-2
_GRID_HI_PER_KM2 = 1e5
_MC_REL_TOL = 0.05


@dataclass(frozen=True)
class RunArtifacts:
    """Paths of the files a pipeline run produced, plus its manifest."""

    demand_csv_path: Path
    plan_json_path: Path
    savings_json_path: Path
    series_csv_path: Path
    manifest: dict


@dataclass(frozen=True)
class SweepResult:
    """One row per parameter value; failed points are collected, not fatal."""

    parameter_values: np.ndarray
    total_saving_fraction: np.ndarray
    per_region_static_saving: np.ndarray
    fleet_size: np.ndarray
    objective: np.ndarray
    region_ids: tuple
    failures: list


def worker_count(n_tasks: int) -> int:
    """Parallel width for sweep points: machine width, capped by
    ``MBSPLAN_THREADS`` and by the number of tasks."""
    limit = os.cpu_count() or 1
    env = os.environ.get("MBSPLAN_THREADS")
    if env is not None:
        try:
            limit = min(limit, max(1, int(env)))
        except ValueError:
            raise ValueError(f"MBSPLAN_THREADS must be an integer, got {env!r}") from None
    return max(1, min(limit, n_tasks))


def _quad_from_scenario(scenario: Scenario) -> QuadratureSpec:
    if scenario.quadrature is None:
        return QuadratureSpec()
    return QuadratureSpec(**scenario.quadrature)


def _load(config_path) -> tuple[Scenario, bytes]:
    """Scenario plus the exact bytes that define it (for the manifest hash)."""
    if config_path is None:
        scenario = default_scenario()
        raw = json.dumps(default_config(), sort_keys=True).encode()
        return scenario, raw
    raw = Path(config_path).read_bytes()
    return load_scenario_file(config_path), raw


@dataclass(frozen=True)
class _Solved:
    scenario: Scenario
    users: UserDensityMatrix
    demand: DemandMatrix
    plan: DeploymentPlan
    report: SavingsReport


def _solve_scenario(scenario: Scenario, costs: CostModel = CostModel(),
                    demand: DemandMatrix | None = None) -> _Solved:
    """The shared run/sweep path; sweeps reuse it so that identical inputs
    give bit-identical outputs either way."""
    users = user_density_matrix(scenario)
    if demand is None:
        demand = demand_matrix(users, scenario.radio, _quad_from_scenario(scenario))
    plan = optimal_plan(demand, scenario.areas_m2(), costs)
    violations = verify_plan(plan, demand, scenario.areas_m2())
    if violations:
        raise RuntimeError(f"optimizer emitted an infeasible plan: {violations[:3]}")
    report = savings(plan, demand, scenario.areas_m2())
    return _Solved(scenario, users, demand, plan, report)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_series_csv(path: Path, solved: _Solved) -> None:
    """Wide per-(slot, region) series used for the daily-profile figures.

    Derived columns are computed on the already-converted per-km^2 values,
    so total = static + mbs and excess = total - baseline hold bit-exactly
    on re-parse.
    """
    demand = solved.demand.values
    plan = solved.plan
    caps = demand.max(axis=0)
    times = solved.users.slot_times_h
    ids = solved.scenario.region_ids
    lines = ["slot,time_h,region_id,baseline_per_km2,static_only_per_km2,"
             "static_per_km2,mbs_per_km2,total_per_km2,excess_per_km2,mbs_fraction"]
    for j in range(demand.shape[0]):
        for z in range(demand.shape[1]):
            baseline = demand[j, z] * 1e6
            static = plan.static_density[z] * 1e6
            mbs = plan.mbs_schedule[j, z] * 1e6
            total = static + mbs
            lines.append(",".join((
                str(j), repr(float(times[j])), ids[z], repr(float(baseline)),
                repr(float(caps[z] * 1e6)), repr(float(static)), repr(float(mbs)),
                repr(float(total)), repr(float(total - baseline)),
                repr(float(solved.report.mbs_fraction_series[j, z])),
            )))
    path.write_text("\n".join(lines) + "\n")


def run_pipeline(config_path, out_dir) -> RunArtifacts:
    """Run the full chain on one scenario and write all artifacts.

    ``config_path`` may be None to use the built-in two-district scenario.
    Partial outputs are removed if any stage fails.
    """
    started = time.perf_counter()
    scenario, raw = _load(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "demand": out / "demand.csv",
        "plan": out / "plan.json",
        "savings": out / "savings.json",
        "series": out / "series.csv",
        "manifest": out / "manifest.json",
    }
    written: list[Path] = []
    try:
        solved = _solve_scenario(scenario)
        ids = scenario.region_ids
        write_demand_csv(paths["demand"], solved.demand, solved.users, ids)
        written.append(paths["demand"])
        _write_json(paths["plan"], plan_to_dict(solved.plan, ids))
        written.append(paths["plan"])
        _write_json(paths["savings"], savings_to_dict(solved.report, ids))
        written.append(paths["savings"])
        _write_series_csv(paths["series"], solved)
        written.append(paths["series"])
        manifest = {
            "config_sha256": hashlib.sha256(raw).hexdigest(),
            "tool_version": __version__,
            "wall_time_s": time.perf_counter() - started,
        }
        _write_json(paths["manifest"], manifest)
        written.append(paths["manifest"])
    except BaseException:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        raise
    return RunArtifacts(demand_csv_path=paths["demand"], plan_json_path=paths["plan"],
                        savings_json_path=paths["savings"], series_csv_path=paths["series"],
                        manifest=manifest)


def _sweep_collect(values, solve_one, region_count) -> SweepResult:
    """Run one solver callable per parameter value, in order, tolerating
    per-point failures."""
    values = np.asarray(values, dtype=float)
    n = values.size
    saving = np.full(n, np.nan)
    per_region = np.full((n, region_count), np.nan)
    fleet = np.full(n, np.nan)
    objective = np.full(n, np.nan)
    failures: list = []
    ids: tuple = ()

    def attempt(i):
        return solve_one(float(values[i]))

    results = [None] * n
    workers = worker_count(n)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(attempt, i) for i in range(n)]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append((float(values[i]), f"{type(exc).__name__}: {exc}"))
    else:
        for i in range(n):
            try:
                results[i] = attempt(i)
            except Exception as exc:
                failures.append((float(values[i]), f"{type(exc).__name__}: {exc}"))

    for i, res in enumerate(results):
        if res is None:
            continue
        saving_i, solved = res
        saving[i] = saving_i
        per_region[i] = solved.report.per_region_static_saving_fraction
        fleet[i] = solved.plan.fleet_size
        objective[i] = solved.plan.objective_value
        ids = solved.scenario.region_ids
    return SweepResult(parameter_values=values, total_saving_fraction=saving,
                       per_region_static_saving=per_region, fleet_size=fleet,
                       objective=objective, region_ids=ids, failures=failures)


def sweep_density_ratio(config_path, ratios) -> SweepResult:
    """Vary the office/residential peak-density ratio at constant total users.

    The office district is pinned at 1 km^2 and 1e4 users/km^2; for ratio
    rho the residential district gets peak density 1e4/rho over rho km^2,
    holding its peak-hour user count at 1e4. Ratio 10 reproduces the
    built-in default scenario.
    """
    base, _ = _load(config_path)
    if len(base.regions) != 2:
        raise ValueError(f"the density-ratio sweep needs exactly 2 regions, "
                         f"got {len(base.regions)}")
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios < 1.0):
        raise ValueError("density ratios must be >= 1")

    def solve_one(rho):
        regions = [
            dataclasses.replace(base.regions[0], area_km2=1.0,
                                peak_user_density_per_km2=1e4),
            dataclasses.replace(base.regions[1], area_km2=rho,
                                peak_user_density_per_km2=1e4 / rho),
        ]
        solved = _solve_scenario(dataclasses.replace(base, regions=regions))
        return solved.report.total_saving_fraction, solved

    return _sweep_collect(ratios, solve_one, 2)


def sweep_cost_ratio(config_path, cost_ratios) -> SweepResult:
    """Vary the static/mobile unit-cost ratio on a fixed demand matrix.

    Dimensioning runs once; each point solves the deployment LP with static
    cost equal to the ratio (mobile cost 1) and reports the cost saving
    against an all-static build priced at the same static cost.
    """
    scenario, _ = _load(config_path)
    ratios = np.asarray(cost_ratios, dtype=float)
    if np.any(ratios < 1.0):
        raise ValueError("cost ratios must be >= 1")
    users = user_density_matrix(scenario)
    demand = demand_matrix(users, scenario.radio, _quad_from_scenario(scenario))

    def solve_one(ratio):
        costs = CostModel(static_unit_cost=ratio, mobile_unit_cost=1.0)
        solved = _solve_scenario(scenario, costs=costs, demand=demand)
        static_only_cost = ratio * solved.report.static_only_total
        saving = 0.0 if static_only_cost <= 0.0 else \
            1.0 - solved.plan.objective_value / static_only_cost
        return saving, solved

    return _sweep_collect(ratios, solve_one, len(scenario.regions))


def write_sweep_csv(path, result: SweepResult) -> None:
    """``parameter,total_saving_fraction,fleet_size,objective`` plus one
    ``static_saving_<region>`` column per region; failed points are skipped."""
    header = "parameter,total_saving_fraction,fleet_size,objective"
    for rid in result.region_ids:
        header += f",static_saving_{rid}"
    lines = [header]
    for i, value in enumerate(result.parameter_values):
        if not np.isfinite(result.fleet_size[i]):
            continue  # failed point, recorded in result.failures
        cells = [repr(float(value)), repr(float(result.total_saving_fraction[i])),
                 repr(float(result.fleet_size[i])), repr(float(result.objective[i]))]
        cells += [repr(float(v)) for v in result.per_region_static_saving[i]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# model validation against oracles

@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]


def validate(config_path, mc_trials: int = 10000, seed: int = 1234) -> ValidationReport:
    """Replay the analytic model against its independent oracles.

    Three Monte Carlo delay spot checks (pass below 5% relative error), a
    zero-traffic identity, and a grid-scan cross-check of the dimensioning
    bisection (pass when the answers land within one cell of a 2000-point
    log grid). Deterministic for a fixed seed.
    """
    if mc_trials < 1000:
        raise ValueError(f"mc_trials must be at least 1000, got {mc_trials}")
    scenario, _ = _load(config_path)
    params = scenario.radio
    quad = _quad_from_scenario(scenario)
    checks: list[ValidationCheck] = []

    # Zero traffic: the analytic delay and the simulated delay are both
    # exactly zero (no users, nothing to transmit).
    analytic_zero = delay_given_utilization(10e-6, 0.0, 1.0, params, quad)
    mc_zero = mc_delay_oracle(10e-6, 0.0, 1.0, params, trials=1000, rng_seed=seed)
    ok = analytic_zero == 0.0 and mc_zero == 0.0
    checks.append(ValidationCheck(
        "zero-traffic identity", ok,
        f"analytic {analytic_zero!r}, simulated {mc_zero!r} (both must be 0.0)"))

    for i, (bs_km2, users_km2) in enumerate(MC_SPOT_DENSITIES_PER_KM2):
        analytic = delay_given_utilization(bs_km2 / 1e6, users_km2 / 1e6, 1.0, params, quad)
        simulated = mc_delay_oracle(bs_km2 / 1e6, users_km2 / 1e6, 1.0, params,
                                    trials=mc_trials, rng_seed=seed + i)
        rel = abs(simulated - analytic) / analytic
        checks.append(ValidationCheck(
            f"mc-delay bs={bs_km2:g}/km2 users={users_km2:g}/km2", rel < _MC_REL_TOL,
            f"analytic {analytic:.6e} s/bit, simulated {simulated:.6e} s/bit, "
            f"rel err {100 * rel:.2f}% (limit {100 * _MC_REL_TOL:.0f}%)"))

    grid = np.logspace(np.log10(_GRID_LO_PER_KM2), np.log10(_GRID_HI_PER_KM2),
                       _GRID_POINTS) / 1e6
    tau0 = params.target_delay_s_per_bit
    for users_km2 in GRID_SPOT_USER_DENSITIES_PER_KM2:
        lam_u = users_km2 / 1e6
        feasible = np.array([evaluate_qos(lam, lam_u, params, quad).delay_s_per_bit <= tau0
                             for lam in grid])
        if not feasible.any():
            checks.append(ValidationCheck(
                f"grid-scan users={users_km2:g}/km2", False,
                "no feasible grid point up to the density cap"))
            continue
        try:
            solved = min_bs_density(lam_u, params, quad)
        except Exception as exc:
            checks.append(ValidationCheck(
                f"grid-scan users={users_km2:g}/km2", False,
                f"bisection failed where the grid scan succeeded: {exc}"))
            continue
        k = int(np.argmax(feasible))
        lo = grid[max(k - 1, 0)] * (1.0 - 1e-9)
        hi = grid[min(k + 1, grid.size - 1)] * (1.0 + 1e-9)
        checks.append(ValidationCheck(
            f"grid-scan users={users_km2:g}/km2", lo <= solved <= hi,
            f"bisection {solved * 1e6:.6g}/km2, grid first-feasible "
            f"{grid[k] * 1e6:.6g}/km2 (cell width {100 * (grid[1] / grid[0] - 1):.2f}%)"))

    return ValidationReport(checks=tuple(checks))
