"""Minimum station density meeting the delay target, per slot and region.

The self-consistent delay is non-increasing in the station density (more
stations mean shorter links, smaller cells and less load per station), so
the smallest density with delay <= target is found by bracketing and
bisection, cell by cell. Cells are independent: the objective sums per-cell
densities and every constraint touches exactly one (slot, region) pair, so
the cell-wise minimum is the global one.

A defensive fallback handles the hypothetical case where the probed delays
do not decrease with density: a coarse log-grid scan locates the first
feasible segment and bisection resumes inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import M2_PER_KM2, RadioParams, UserDensityMatrix
from .qosmodel import FixedPointDiverged, QuadratureSpec, evaluate_qos

DEFAULT_DENSITY_CAP_PER_M2 = 1e5 / M2_PER_KM2  # 1e5 stations per km^2
BISECTION_REL_TOL = 1e-4

# Coarse scan used only when monotonicity is violated.
_FALLBACK_GRID_POINTS = 200
_FALLBACK_GRID_FLOOR_PER_M2 = 1e-2 / M2_PER_KM2

# Relative slack when comparing probed delays for the monotonicity audit;
# covers quadrature rounding without masking real violations.
_MONOTONE_SLACK = 1e-9


class InfeasibleDemand(RuntimeError):
    """No density up to the cap meets the delay target."""


class NonMonotoneDetected(RuntimeError):
    """Probed delays increased with density; bisection preconditions broken."""


@dataclass(frozen=True)
class CellDiagnostics:
    bisection_iterations: int
    achieved_delay_s_per_bit: float
    converged: bool


@dataclass(frozen=True)
class DemandMatrix:
    """Per-slot, per-region minimum station density (stations per m^2)."""

    values: np.ndarray
    per_cell_diagnostics: tuple | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be a J x Z matrix, got shape {values.shape}")
        if np.any(values < 0):
            raise ValueError("station densities must be >= 0")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_slots(self) -> int:
        return self.values.shape[0]

    @property
    def num_regions(self) -> int:
        return self.values.shape[1]


class _Prober:
    """Counts delay probes and audits monotonicity along bracketing moves."""

    def __init__(self, eval_fn):
        self.eval_fn = eval_fn
        self.count = 0

    def __call__(self, lambda_b: float) -> float:
        self.count += 1
        return self.eval_fn(lambda_b)


def _default_eval_fn(lambda_u, params, quad):
    def probe(lambda_b: float) -> float:
        result = evaluate_qos(lambda_b, lambda_u, params, quad)
        if not result.converged:
            raise FixedPointDiverged(
                f"utilization fixed point did not converge at lambda_b={lambda_b:.6e}, "
                f"lambda_u={lambda_u:.6e}"
            )
        return result.delay_s_per_bit
    return probe


def _solve_cell(lambda_u, params, quad, lambda_cap, rel_tol, eval_fn):
    if lambda_u < 0:
        raise ValueError(f"lambda_u must be >= 0, got {lambda_u}")
    if lambda_cap <= 0:
        raise ValueError(f"lambda_cap must be > 0, got {lambda_cap}")
    if lambda_u == 0.0:
        return 0.0, CellDiagnostics(0, 0.0, True)
    target = params.target_delay_s_per_bit
    probe = _Prober(eval_fn if eval_fn is not None else _default_eval_fn(lambda_u, params, quad))
    try:
        density, delay = _bracket_and_bisect(probe, lambda_u, target, lambda_cap, rel_tol)
    except NonMonotoneDetected:
        density, delay = _grid_scan(probe, target, lambda_cap, rel_tol)
    return density, CellDiagnostics(probe.count, delay, True)


def _bracket_and_bisect(probe, lambda_u, target, lambda_cap, rel_tol):
    start = min(lambda_u / 10.0, lambda_cap)
    d_start = probe(start)
    if d_start <= target:
        # Already feasible: halve downward until the target is violated.
        hi, d_hi = start, d_start
        lo = None
        for _ in range(200):
            cand = hi / 2.0
            d_cand = probe(cand)
            if d_cand < d_hi * (1.0 - _MONOTONE_SLACK):
                raise NonMonotoneDetected(
                    f"delay decreased from {d_hi:.6e} to {d_cand:.6e} while the "
                    f"density was halved to {cand:.6e}"
                )
            if d_cand > target:
                lo = cand
                break
            hi, d_hi = cand, d_cand
        if lo is None:
            raise NonMonotoneDetected(
                f"no infeasible density found after 200 halvings below {start:.6e}"
            )
    else:
        # Infeasible: double upward; try the cap itself before giving up.
        lo, d_lo = start, d_start
        hi = d_hi = None
        while hi is None:
            cand = lo * 2.0
            if cand > lambda_cap:
                d_cap = probe(lambda_cap)
                if d_cap > target:
                    raise InfeasibleDemand(
                        f"delay target {target:.3e} s/bit unmet at the density cap "
                        f"{lambda_cap * M2_PER_KM2:.6g} per km^2 (user density "
                        f"{lambda_u * M2_PER_KM2:.6g} per km^2)"
                    )
                hi, d_hi = lambda_cap, d_cap
                break
            d_cand = probe(cand)
            if d_cand > d_lo * (1.0 + _MONOTONE_SLACK):
                raise NonMonotoneDetected(
                    f"delay increased from {d_lo:.6e} to {d_cand:.6e} while the "
                    f"density was doubled to {cand:.6e}"
                )
            if d_cand <= target:
                hi, d_hi = cand, d_cand
            else:
                lo, d_lo = cand, d_cand
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        d_mid = probe(mid)
        if d_mid <= target:
            hi, d_hi = mid, d_mid
        else:
            lo = mid
    return hi, d_hi


def _grid_scan(probe, target, lambda_cap, rel_tol):
    grid = np.logspace(
        np.log10(_FALLBACK_GRID_FLOOR_PER_M2), np.log10(lambda_cap), _FALLBACK_GRID_POINTS
    )
    prev = None
    for lam in grid:
        delay = probe(float(lam))
        if delay <= target:
            hi, d_hi = float(lam), delay
            if prev is None:
                return hi, d_hi
            lo = prev
            while hi - lo > rel_tol * hi:
                mid = 0.5 * (lo + hi)
                d_mid = probe(mid)
                if d_mid <= target:
                    hi, d_hi = mid, d_mid
                else:
                    lo = mid
            return hi, d_hi
        prev = float(lam)
    raise InfeasibleDemand(
        f"delay target {target:.3e} s/bit unmet everywhere on the fallback grid "
        f"up to {lambda_cap * M2_PER_KM2:.6g} per km^2"
    )


def min_bs_density(
    lambda_u: float,
    params: RadioParams,
    quad: QuadratureSpec = QuadratureSpec(),
    lambda_cap: float = DEFAULT_DENSITY_CAP_PER_M2,
    rel_tol: float = BISECTION_REL_TOL,
    eval_fn=None,
) -> float:
    """Smallest station density (to relative tolerance ``rel_tol``) whose
    self-consistent delay meets the target, for user density ``lambda_u``.

    ``eval_fn`` may replace the delay evaluation (a callable lambda_b ->
    delay); the default runs the full utilization fixed point.
    """
    density, _ = _solve_cell(lambda_u, params, quad, lambda_cap, rel_tol, eval_fn)
    return density


def demand_matrix(
    users: UserDensityMatrix,
    params: RadioParams,
    quad: QuadratureSpec = QuadratureSpec(),
    lambda_cap: float = DEFAULT_DENSITY_CAP_PER_M2,
) -> DemandMatrix:
    """Cell-wise minimum station densities for a whole scenario.

    Results are memoized on the user density (quantized to 12 significant
    digits), so slots with repeated loads cost one solve.
    """
    num_slots, num_regions = users.values.shape
    values = np.zeros((num_slots, num_regions))
    diagnostics = [[None] * num_regions for _ in range(num_slots)]
    memo: dict = {}
    for j in range(num_slots):
        for z in range(num_regions):
            lam = float(users.values[j, z])
            key = float(f"{lam:.12g}")
            if key not in memo:
                try:
                    memo[key] = _solve_cell(lam, params, quad, lambda_cap, BISECTION_REL_TOL, None)
                except (InfeasibleDemand, NonMonotoneDetected, FixedPointDiverged) as exc:
                    raise type(exc)(f"slot {j}, region index {z}: {exc}") from exc
            values[j, z], diagnostics[j][z] = memo[key]
    return DemandMatrix(
        values=values,
        per_cell_diagnostics=tuple(tuple(row) for row in diagnostics),
    )


def static_only_deployment(demand: DemandMatrix) -> np.ndarray:
    """Per-region density a fixed deployment needs: the peak over slots."""
    return demand.values.max(axis=0)


def write_demand_csv(path, demand: DemandMatrix, users: UserDensityMatrix, region_ids) -> None:
    """One row per (slot, region): user density, required station density and
    the delay actually achieved at the returned density. km^2 units."""
    if demand.per_cell_diagnostics is None:
        raise ValueError("demand matrix carries no diagnostics; export needs them")
    lines = ["slot,time_h,region_id,user_density_per_km2,min_bs_density_per_km2,achieved_delay_s_per_bit"]
    for j in range(demand.num_slots):
        for z, rid in enumerate(region_ids):
            diag = demand.per_cell_diagnostics[j][z]
            lines.append(
                f"{j},{float(users.slot_times_h[j])!r},{rid},"
                f"{float(users.values[j, z] * M2_PER_KM2)!r},"
                f"{float(demand.values[j, z] * M2_PER_KM2)!r},"
                f"{float(diag.achieved_delay_s_per_bit)!r}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
