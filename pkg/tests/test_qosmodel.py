"""Delay-model tests: geometry, capacity, linearity, fixed point, kernels."""

import numpy as np
import pytest

from mbsplan.qosmodel import (QuadratureSpec, capacity, delay_given_utilization,
                              evaluate_qos, mc_delay_oracle, mean_interference,
                              overlap_area, pair_distance, shared_load_kernel)
from mbsplan.scenario import RadioParams

PARAMS = RadioParams()
QUAD = QuadratureSpec()
PER_KM2 = 1e-6  # density conversion: 1 per km^2 in per m^2


def test_pair_distance_hand_values():
    # sin(pi/2) = 1: colinear on the same side -> 3 + 4 = 7
    assert pair_distance(3.0, 4.0, np.pi / 2) == pytest.approx(7.0, abs=1e-12)
    # sin(-pi/2) = -1: opposite sides -> |3 - 4| = 1
    assert pair_distance(3.0, 4.0, -np.pi / 2) == pytest.approx(1.0, abs=1e-12)
    assert pair_distance(2.0, 2.0, -np.pi / 2) == pytest.approx(0.0, abs=1e-9)


def test_overlap_area_hand_values():
    # zero-radius disc contributes nothing
    assert overlap_area(1.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    # two unit circles at center distance 1: lens = 2pi/3 - sqrt(3)/2
    got = overlap_area(1.0, 1.0, 7.0 * np.pi / 6.0)
    expected = np.pi - (2.0 * np.pi / 3.0 - np.sqrt(3.0) / 2.0)
    assert got == pytest.approx(expected, abs=1e-12)
    # externally tangent discs: the whole disc of radius 1 is outside
    assert overlap_area(10.0, 1.0, np.pi / 2.0) == pytest.approx(np.pi, abs=1e-9)


def test_overlap_area_theta_mirror_symmetry():
    rng = np.random.default_rng(3)
    r = rng.uniform(0.1, 10.0, size=200)
    x = rng.uniform(0.1, 10.0, size=200)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=200)
    a = overlap_area(r, x, theta)
    b = overlap_area(r, x, np.pi - theta)
    # the identity is exact in sin(theta); float rounding of pi - theta
    # perturbs the 16th digit, nothing more
    assert np.allclose(a, b, rtol=0.0, atol=1e-10)


def test_overlap_area_range_and_nested_limit():
    rng = np.random.default_rng(5)
    r = rng.uniform(0.0, 10.0, size=500)
    x = rng.uniform(0.0, 10.0, size=500)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=500)
    area = overlap_area(r, x, theta)
    assert np.all(area >= 0.0) and np.all(area <= np.pi * x ** 2 + 1e-12)
    # concentric limit (d = 0 at r = x, sin theta = -1): pi x^2 - pi min^2 = 0
    assert overlap_area(2.0, 2.0, -np.pi / 2.0) == pytest.approx(0.0, abs=1e-12)
    # fully nested: small disc inside the large circle contributes nothing new
    assert overlap_area(10.0, 0.5, -np.pi / 2.0) == pytest.approx(0.0, abs=1e-12)


def test_capacity_unit_snr():
    # pick interference so the SINR argument is exactly 1 -> B/k bits/s
    r = 1.0
    noise = PARAMS.noise_psd_w_per_hz * PARAMS.bandwidth_hz / PARAMS.reuse_factor
    interference = PARAMS.reference_gain * PARAMS.tx_power_w * r ** -PARAMS.path_loss_exponent - noise
    assert capacity(r, PARAMS, interference) == pytest.approx(1e7, rel=1e-12)


def test_capacity_monotone_decreasing():
    radii = np.linspace(10.0, 2000.0, 40)
    caps = np.array([capacity(r, PARAMS, 0.0) for r in radii])
    assert np.all(np.diff(caps) < 0.0)
    cap_low = capacity(100.0, PARAMS, 1e-12)
    cap_high = capacity(100.0, PARAMS, 1e-10)
    assert cap_high < cap_low


def test_capacity_reuse_halves_with_fixed_snr():
    # halving the power while halving the per-reuse bandwidth keeps the SINR
    # argument fixed, so the rate halves exactly
    base = capacity(50.0, PARAMS, 0.0)
    halved = capacity(50.0, RadioParams(reuse_factor=2, tx_power_w=PARAMS.tx_power_w / 2), 0.0)
    assert halved == pytest.approx(base / 2.0, rel=1e-12)


def test_mean_interference_formula():
    r, lam_b, u = 200.0, 30.0 * PER_KM2, 0.7
    expected = (PARAMS.reference_gain * PARAMS.tx_power_w * 2.0 * np.pi
                * r ** (2.0 - PARAMS.path_loss_exponent) * lam_b * u
                / (PARAMS.reuse_factor * (PARAMS.path_loss_exponent - 2.0)))
    assert mean_interference(r, PARAMS, lam_b, u) == pytest.approx(expected, rel=1e-12)
    assert mean_interference(r, PARAMS, 0.0, u) == 0.0
    assert mean_interference(r, PARAMS, lam_b, 0.0) == 0.0
    doubled = RadioParams(tx_power_w=2.0 * PARAMS.tx_power_w)
    assert mean_interference(r, doubled, lam_b, u) == pytest.approx(
        2.0 * mean_interference(r, PARAMS, lam_b, u), rel=1e-12)


def test_mean_interference_rejects_bad_utilization():
    with pytest.raises(ValueError):
        mean_interference(100.0, PARAMS, 10.0 * PER_KM2, 1.0 + 1e-6)
    with pytest.raises(ValueError):
        mean_interference(100.0, PARAMS, 10.0 * PER_KM2, -1e-6)


def test_shared_load_kernel_positive_and_converged():
    g = shared_load_kernel(1.0, 0.1, QUAD)
    assert 0.0 < g < np.pi * (0.1 + np.sqrt(np.log(1e12) / np.pi)) ** 2
    lam_b = 10.0 * PER_KM2
    r = 100.0
    coarse = shared_load_kernel(lam_b, r, QUAD)
    fine = shared_load_kernel(lam_b, r, QUAD.doubled())
    assert abs(fine - coarse) / coarse < QUAD.refinement_rel_tol


def test_shared_load_kernel_against_mc_integration():
    # uniform Monte Carlo estimate of the same double integral, 1e6 samples
    rng = np.random.default_rng(7)
    for lam_b_km2, r in ((10.0, 100.0), (100.0, 30.0)):
        lam_b = lam_b_km2 * PER_KM2
        x_max = np.sqrt(np.log(1.0 / QUAD.tail_mass_epsilon) / (lam_b * np.pi)) + r
        x = rng.uniform(0.0, x_max, size=1_000_000)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=1_000_000)
        values = np.exp(-lam_b * overlap_area(r, x, theta)) * x
        estimate = values.mean() * x_max * 2.0 * np.pi
        exact = shared_load_kernel(lam_b, r, QUAD)
        assert abs(estimate - exact) / exact < 0.01


def test_delay_linear_in_user_density():
    lam_b = 20.0 * PER_KM2
    lam_u = 500.0 * PER_KM2
    base = delay_given_utilization(lam_b, lam_u, 1.0, PARAMS, QUAD)
    assert delay_given_utilization(lam_b, 0.0, 1.0, PARAMS, QUAD) == 0.0
    twice = delay_given_utilization(lam_b, 2.0 * lam_u, 1.0, PARAMS, QUAD)
    assert twice == pytest.approx(2.0 * base, rel=1e-12)


def test_delay_decreasing_in_bs_density():
    lam_u = 1000.0 * PER_KM2
    grid = np.logspace(np.log10(0.1), np.log10(1000.0), 10) * PER_KM2
    delays = [delay_given_utilization(lam, lam_u, 1.0, PARAMS, QUAD) for lam in grid]
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(delays, delays[1:]))


def test_delay_matches_literal_kernel_route():
    # the cached scale-invariant kernel must agree with assembling the delay
    # integral from literal shared_load_kernel calls on a fresh radial rule
    lam_b = 25.0 * PER_KM2
    lam_u = 800.0 * PER_KM2
    u = 0.6
    fast = delay_given_utilization(lam_b, lam_u, u, PARAMS, QUAD)
    r_max = np.sqrt(np.log(1.0 / QUAD.tail_mass_epsilon) / (lam_b * np.pi))
    nodes, weights = np.polynomial.legendre.leggauss(QUAD.nodes_r)
    r = 0.5 * r_max * (nodes + 1.0)
    w = 0.5 * r_max * weights
    total = 0.0
    for ri, wi in zip(r, w):
        g = shared_load_kernel(lam_b, ri, QUAD)
        rate = capacity(ri, PARAMS, mean_interference(ri, PARAMS, lam_b, u))
        total += wi * g * np.exp(-lam_b * np.pi * ri ** 2) * lam_b * 2.0 * np.pi * ri / rate
    assert fast == pytest.approx(lam_u * total, rel=1e-10)


def test_evaluate_qos_zero_traffic():
    result = evaluate_qos(10.0 * PER_KM2, 0.0, PARAMS, QUAD)
    assert result.delay_s_per_bit == 0.0
    assert result.utilization == 0.0
    assert result.converged
    assert result.fixed_point_iterations <= 2


def test_evaluate_qos_fixed_point_identity():
    for lam_b_km2, lam_u_km2 in ((10.0, 100.0), (50.0, 1000.0), (5.0, 5000.0)):
        result = evaluate_qos(lam_b_km2 * PER_KM2, lam_u_km2 * PER_KM2, PARAMS, QUAD)
        assert result.converged
        clamped = min(max(result.delay_s_per_bit / PARAMS.target_delay_s_per_bit, 0.0), 1.0)
        assert result.utilization == pytest.approx(clamped, abs=1e-6)


def test_evaluate_qos_overloaded_cell_saturates():
    # far too few stations: utilization pins at 1, delay exceeds the target
    result = evaluate_qos(1.0 * PER_KM2, 5000.0 * PER_KM2, PARAMS, QUAD)
    assert result.converged
    assert result.utilization == 1.0
    assert result.delay_s_per_bit > PARAMS.target_delay_s_per_bit


def test_evaluate_qos_start_point_invariance():
    # tighter tolerance than default so both starts land on the same point
    for lam_b_km2, lam_u_km2 in ((20.0, 500.0), (40.0, 2000.0)):
        from_one = evaluate_qos(lam_b_km2 * PER_KM2, lam_u_km2 * PER_KM2, PARAMS, QUAD,
                                initial_utilization=1.0, tol=1e-8)
        from_zero = evaluate_qos(lam_b_km2 * PER_KM2, lam_u_km2 * PER_KM2, PARAMS, QUAD,
                                 initial_utilization=0.0, tol=1e-8)
        assert from_zero.delay_s_per_bit == pytest.approx(
            from_one.delay_s_per_bit, rel=1e-5)


def test_mc_oracle_zero_traffic_and_determinism():
    lam_b = 10.0 * PER_KM2
    assert mc_delay_oracle(lam_b, 0.0, 1.0, PARAMS, trials=1000, rng_seed=1) == 0.0
    first = mc_delay_oracle(lam_b, 100.0 * PER_KM2, 1.0, PARAMS, trials=1000, rng_seed=42)
    second = mc_delay_oracle(lam_b, 100.0 * PER_KM2, 1.0, PARAMS, trials=1000, rng_seed=42)
    assert first == second
    assert first > 0.0


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(nodes_r=4)
    with pytest.raises(ValueError):
        QuadratureSpec(tail_mass_epsilon=1e-3)
    with pytest.raises(ValueError):
        QuadratureSpec(refinement_rel_tol=0.0)
    doubled = QUAD.doubled()
    assert (doubled.nodes_r, doubled.nodes_x, doubled.nodes_theta) == (128, 128, 128)
    assert doubled.tail_mass_epsilon == QUAD.tail_mass_epsilon
