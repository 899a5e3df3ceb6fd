"""Mean per-bit downlink delay for a Poisson field of base stations.

Stations form a planar Poisson process of density ``lambda_b`` and active
users an independent one of density ``lambda_u``; every user attaches to its
nearest station, and a station splits its airtime equally over attached
users. For a tagged user at distance r from its serving station, a second
user at distance x from that same station (planar angle theta) shares it
exactly when no station sits closer to the second user. The region that must
be empty of stations for that to happen is the disc of radius x around the
second user minus its overlap with the disc of radius r around the tagged
user, which is already known to be empty; its area is ``overlap_area``.

Averaging the shared-user count over both point processes and dividing by
the Shannon rate at distance r gives the mean per-bit delay as a triple
integral over (r, x, theta). Interference enters through the mean busy
fraction (utilization) of the other stations, which itself equals
delay / target_delay, so the delay is solved as a damped fixed point.

The overlap area is homogeneous of degree 2 in the lengths, so the whole
radial quadrature grid at density lambda_b maps node-for-node onto the
unit-density grid scaled by sqrt(lambda_b). The expensive double integral is
therefore computed once per quadrature spec ("unit kernel") and reused for
every density, slot and fixed-point iteration; only the cheap 1-D capacity
weighting is reevaluated.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .scenario import RadioParams

TWO_PI = 2.0 * math.pi
_LN2 = math.log(2.0)

# acos arguments may stray outside [-1, 1] by rounding at tangency
# configurations; anything beyond this slack is treated as a bug.
_ACOS_SLACK = 1e-9

# Trials per vectorized batch in the Monte Carlo oracle. Fixed, so the draw
# sequence (and hence the result for a given seed) never depends on timing.
_MC_BATCH = 64


class NonFinite(ArithmeticError):
    """An integrand produced NaN/inf, or geometry inputs left their domain."""


class FixedPointDiverged(RuntimeError):
    """The utilization fixed point failed to converge within the iteration cap."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor-product Gauss-Legendre node counts and truncation control.

    ``tail_mass_epsilon`` sets where the radial integrals are cut: at the
    radius where the void probability exp(-lambda_b * pi * t^2) drops below
    it. ``refinement_rel_tol`` is the relative change considered acceptable
    when all node counts are doubled (used by convergence checks, not at
    runtime).
    """

    nodes_r: int = 64
    nodes_x: int = 64
    nodes_theta: int = 64
    tail_mass_epsilon: float = 1e-12
    refinement_rel_tol: float = 1e-4

    def __post_init__(self):
        for name in ("nodes_r", "nodes_x", "nodes_theta"):
            n = getattr(self, name)
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 8:
                raise ValueError(f"{name} must be an integer >= 8, got {n!r}")
        if not 0.0 < self.tail_mass_epsilon <= 1e-6:
            raise ValueError(
                f"tail_mass_epsilon must lie in (0, 1e-6], got {self.tail_mass_epsilon}"
            )
        if not 0.0 < self.refinement_rel_tol <= 1e-2:
            raise ValueError(
                f"refinement_rel_tol must lie in (0, 1e-2], got {self.refinement_rel_tol}"
            )

    def doubled(self) -> "QuadratureSpec":
        return replace(
            self,
            nodes_r=2 * self.nodes_r,
            nodes_x=2 * self.nodes_x,
            nodes_theta=2 * self.nodes_theta,
        )


@dataclass(frozen=True)
class QosEvaluation:
    delay_s_per_bit: float
    utilization: float
    fixed_point_iterations: int
    converged: bool


@functools.lru_cache(maxsize=32)
def _gauss_unit(n: int):
    """Gauss-Legendre nodes/weights on [0, 1], cached per node count."""
    xi, w = np.polynomial.legendre.leggauss(n)
    xi = 0.5 * (xi + 1.0)
    w = 0.5 * w
    xi.setflags(write=False)
    w.setflags(write=False)
    return xi, w


def pair_distance(r, x, theta):
    """Distance between the tagged user and a point at polar (x, theta)
    relative to the serving station, the tagged user sitting at distance r."""
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    d = np.sqrt(x * x + r * r + 2.0 * x * r * np.sin(theta))
    if d.ndim == 0:
        return float(d)
    return d


def overlap_area(r, x, theta):
    """Area of the disc of radius x around a neighboring user that is not
    covered by the known-empty disc of radius r around the tagged user.

    Computed as pi x^2 minus the two-circle lens area at center distance
    d(r, x, theta). By construction d always lies in [|r - x|, r + x], so the
    discs intersect or touch; acos and sqrt arguments are clamped against
    floating-point noise and the result is clamped to [0, pi x^2]. The
    concentric limit d -> 0 (only reachable with r == x) returns the exact
    nested-circle value pi x^2 - pi min(r, x)^2.
    """
    r, x, theta = np.broadcast_arrays(
        np.asarray(r, dtype=float), np.asarray(x, dtype=float), np.asarray(theta, dtype=float)
    )
    sin_t = np.sin(theta)
    d = np.sqrt(x * x + r * r + 2.0 * x * r * sin_t)
    safe_d = np.where(d > 0.0, d, 1.0)
    a1 = (r + x * sin_t) / safe_d
    a2 = (x + r * sin_t) / safe_d
    worst = max(float(np.max(np.abs(a1))), float(np.max(np.abs(a2)))) - 1.0
    if worst > _ACOS_SLACK:
        raise NonFinite(
            f"overlap_area: acos argument outside [-1, 1] by {worst:.3e}; "
            "inputs are not a valid (r, x, theta) geometry"
        )
    lens = r * r * np.arccos(np.clip(a1, -1.0, 1.0)) + x * x * np.arccos(np.clip(a2, -1.0, 1.0))
    s1 = np.maximum(r * r - (d - x) ** 2, 0.0)
    s2 = np.maximum((d + x) ** 2 - r * r, 0.0)
    lens = lens - 0.5 * np.sqrt(s1 * s2)
    area = math.pi * x * x - lens
    nested = math.pi * x * x - math.pi * np.minimum(r, x) ** 2
    area = np.where(d > 0.0, area, nested)
    area = np.clip(area, 0.0, math.pi * x * x)
    if area.ndim == 0:
        return float(area)
    return area


def _truncation_radius(lambda_b: float, eps: float) -> float:
    """Radius beyond which the void probability exp(-lambda pi t^2) < eps."""
    return math.sqrt(math.log(1.0 / eps) / (lambda_b * math.pi))


def shared_load_kernel(lambda_b: float, r: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Expected-shared-user integral at serving distance r, per unit user
    density: g(lambda_b, r) = int_0^xmax int_0^2pi exp(-lambda_b A) x dtheta dx.

    Multiplying by lambda_u gives the mean number of other users attached to
    the tagged user's station. The x integral is truncated at the void-mass
    radius plus r.
    """
    if lambda_b <= 0:
        raise ValueError(f"lambda_b must be > 0, got {lambda_b}")
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    x_max = _truncation_radius(lambda_b, quad.tail_mass_epsilon) + r
    xi_x, w_x = _gauss_unit(quad.nodes_x)
    xi_t, w_t = _gauss_unit(quad.nodes_theta)
    x = xi_x * x_max
    wx = w_x * x_max
    t = xi_t * TWO_PI
    wt = w_t * TWO_PI
    area = overlap_area(r, x[:, None], t[None, :])
    integrand = np.exp(-lambda_b * area) * x[:, None]
    g = float(wx @ integrand @ wt)
    if not math.isfinite(g):
        raise NonFinite(f"shared_load_kernel: non-finite integral at lambda_b={lambda_b}, r={r}")
    return g


_KERNEL_LOCK = threading.Lock()
_KERNEL_CACHE: dict = {}


def _unit_kernel(quad: QuadratureSpec):
    """Radial nodes and integral weights of the outer integral at unit density.

    Returns (r1, kernel) where r1 are the Gauss-Legendre nodes on
    [0, r_max(lambda_b=1)] and kernel[i] bundles weight, inner double
    integral, nearest-station density and void factor:

        kernel[i] = w_i * g1(r1_i) * exp(-pi r1_i^2) * 2 pi r1_i

    For any density, tau = (lambda_u / lambda_b) * sum_i kernel[i] / C(r1_i /
    sqrt(lambda_b)). This is exact for the Gauss-Legendre rule because the
    overlap area is homogeneous of degree 2 and every truncation radius
    scales with 1 / sqrt(lambda_b).
    """
    cached = _KERNEL_CACHE.get(quad)
    if cached is not None:
        return cached
    with _KERNEL_LOCK:
        cached = _KERNEL_CACHE.get(quad)
        if cached is not None:
            return cached
        r_max = _truncation_radius(1.0, quad.tail_mass_epsilon)
        xi_r, w_r = _gauss_unit(quad.nodes_r)
        r1 = xi_r * r_max
        wr = w_r * r_max
        xi_x, w_x = _gauss_unit(quad.nodes_x)
        xi_t, w_t = _gauss_unit(quad.nodes_theta)
        x_max = r_max + r1
        x = xi_x[None, :] * x_max[:, None]
        wx = w_x[None, :] * x_max[:, None]
        t = xi_t * TWO_PI
        wt = w_t * TWO_PI
        area = overlap_area(r1[:, None, None], x[:, :, None], t[None, None, :])
        g1 = np.einsum("ij,ijk,k->i", wx * x, np.exp(-area), wt)
        kernel = wr * g1 * np.exp(-math.pi * r1 * r1) * TWO_PI * r1
        if not np.all(np.isfinite(kernel)):
            raise NonFinite("unit kernel: non-finite entries; geometry bug")
        r1.setflags(write=False)
        kernel.setflags(write=False)
        _KERNEL_CACHE[quad] = (r1, kernel)
        return r1, kernel


def mean_interference(r, params: RadioParams, lambda_b: float, utilization: float):
    """Average co-channel interference power at distance r from the serving
    station, over a field of stations each busy a fraction ``utilization``
    of the time."""
    alpha = params.path_loss_exponent
    if not -1e-12 <= utilization <= 1.0 + 1e-12:
        raise ValueError(f"utilization must lie in [0, 1], got {utilization}")
    scale = (
        params.reference_gain
        * params.tx_power_w
        * TWO_PI
        * lambda_b
        * utilization
        / (params.reuse_factor * (alpha - 2.0))
    )
    return scale * np.asarray(r, dtype=float) ** (2.0 - alpha)


def capacity(r, params: RadioParams, interference):
    """Shannon rate at distance r over the per-reuse bandwidth B/k, with
    noise power N0 B/k plus the given interference power."""
    b_eff = params.bandwidth_hz / params.reuse_factor
    noise_w = params.noise_psd_w_per_hz * b_eff
    signal = params.reference_gain * params.tx_power_w * np.asarray(r, dtype=float) ** (
        -params.path_loss_exponent
    )
    return b_eff * np.log1p(signal / (noise_w + interference)) / _LN2


def delay_given_utilization(
    lambda_b: float,
    lambda_u: float,
    utilization: float,
    params: RadioParams,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Mean per-bit delay when every station is busy a fixed fraction
    ``utilization`` of the time. Exactly linear in lambda_u."""
    if lambda_b <= 0:
        raise ValueError(f"lambda_b must be > 0, got {lambda_b}")
    if lambda_u < 0:
        raise ValueError(f"lambda_u must be >= 0, got {lambda_u}")
    r1, kernel = _unit_kernel(quad)
    r = r1 / math.sqrt(lambda_b)
    rate = capacity(r, params, mean_interference(r, params, lambda_b, utilization))
    tau = (lambda_u / lambda_b) * float(np.sum(kernel / rate))
    if not math.isfinite(tau):
        raise NonFinite(f"delay: non-finite result at lambda_b={lambda_b}, lambda_u={lambda_u}")
    return tau


def evaluate_qos(
    lambda_b: float,
    lambda_u: float,
    params: RadioParams,
    quad: QuadratureSpec = QuadratureSpec(),
    initial_utilization: float = 1.0,
    tol: float = 1e-6,
    max_iterations: int = 100,
) -> QosEvaluation:
    """Self-consistent delay and utilization at the given densities.

    Interference scales with the stations' busy fraction delay/target, which
    feeds back into the delay, so iterate u -> clamp(tau(u)/target, 0, 1)
    from the busy end u = 1 (worst-case interference). A half step is taken
    whenever successive updates change direction. Non-convergence is
    reported through the ``converged`` flag rather than an exception.
    """
    if lambda_b <= 0:
        raise ValueError(f"lambda_b must be > 0, got {lambda_b}")
    if lambda_u < 0:
        raise ValueError(f"lambda_u must be >= 0, got {lambda_u}")
    target_delay = params.target_delay_s_per_bit
    r1, kernel = _unit_kernel(quad)
    r = r1 / math.sqrt(lambda_b)
    b_eff = params.bandwidth_hz / params.reuse_factor
    noise_w = params.noise_psd_w_per_hz * b_eff
    signal = params.reference_gain * params.tx_power_w * r ** (-params.path_loss_exponent)
    interference_busy = mean_interference(r, params, lambda_b, 1.0)
    users_per_station = lambda_u / lambda_b

    def tau_of(u: float) -> float:
        rate = b_eff * np.log1p(signal / (noise_w + interference_busy * u)) / _LN2
        return users_per_station * float(np.sum(kernel / rate))

    u = float(initial_utilization)
    prev_delta = 0.0
    iterations = 0
    converged = False
    while True:
        tau = tau_of(u)
        iterations += 1
        target = min(max(tau / target_delay, 0.0), 1.0)
        delta = target - u
        if abs(delta) <= tol:
            u = target
            converged = True
            break
        if iterations >= max_iterations:
            u = target
            break
        u = u + 0.5 * delta if delta * prev_delta < 0.0 else target
        prev_delta = delta
    if not math.isfinite(tau):
        raise NonFinite(f"evaluate_qos: non-finite delay at lambda_b={lambda_b}")
    return QosEvaluation(
        delay_s_per_bit=tau,
        utilization=u,
        fixed_point_iterations=iterations,
        converged=converged,
    )


def mc_delay_oracle(
    lambda_b: float,
    lambda_u: float,
    utilization: float,
    params: RadioParams,
    trials: int,
    rng_seed: int,
) -> float:
    """Simulation estimate of the mean per-bit delay, for cross-checking.

    Each trial drops a Poisson field of stations and one of users on a disc
    holding 100 stations in expectation, reads off the tagged user's serving
    distance r and the number N of users falling in the same cell, and
    scores N / C(r) with the analytic mean interference at the given
    utilization (the simulation validates the geometry and load integrals,
    not the interference average). Deterministic for a fixed seed.
    """
    if lambda_b <= 0:
        raise ValueError(f"lambda_b must be > 0, got {lambda_b}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    radius = 10.0 / math.sqrt(lambda_b * math.pi)
    mean_bs = lambda_b * math.pi * radius * radius
    mean_users = lambda_u * math.pi * radius * radius
    rng = np.random.default_rng(rng_seed)
    # Trials within a batch live on well-separated discs so one KD-tree
    # serves the whole batch without cross-talk.
    centers_x = np.arange(_MC_BATCH) * (10.0 * radius)
    total = 0.0
    done = 0
    while done < trials:
        batch = min(_MC_BATCH, trials - done)
        n_bs = rng.poisson(mean_bs, batch)
        n_users = rng.poisson(mean_users, batch)
        bs_total = int(n_bs.sum())
        u_total = int(n_users.sum())
        bs_radii = radius * np.sqrt(rng.random(bs_total))
        bs_angle = rng.uniform(0.0, TWO_PI, bs_total)
        u_radii = radius * np.sqrt(rng.random(u_total))
        u_angle = rng.uniform(0.0, TWO_PI, u_total)
        bs_offset = np.repeat(centers_x[:batch], n_bs)
        u_offset = np.repeat(centers_x[:batch], n_users)
        bs_pos = np.column_stack(
            (bs_radii * np.cos(bs_angle) + bs_offset, bs_radii * np.sin(bs_angle))
        )
        u_pos = np.column_stack((u_radii * np.cos(u_angle) + u_offset, u_radii * np.sin(u_angle)))

        serving = np.full(batch, -1, dtype=np.intp)
        serve_r = np.ones(batch)
        starts = np.concatenate(([0], np.cumsum(n_bs)))
        for t in range(batch):
            seg = bs_radii[starts[t]:starts[t + 1]]
            if seg.size:
                local = int(np.argmin(seg))
                serving[t] = starts[t] + local
                serve_r[t] = seg[local]

        if bs_total and u_total:
            tree = cKDTree(bs_pos)
            nearest = tree.query(u_pos, k=1, workers=1)[1]
            trial_of_user = np.repeat(np.arange(batch), n_users)
            hit = nearest == serving[trial_of_user]
            counts = np.bincount(trial_of_user[hit], minlength=batch)
        else:
            counts = np.zeros(batch)

        ok = serving >= 0
        if np.any(ok & (counts > 0)):
            r_ok = serve_r[ok]
            rate = capacity(
                r_ok, params, mean_interference(r_ok, params, lambda_b, utilization)
            )
            total += float(np.sum(counts[ok] / rate))
        done += batch
    return total / trials
