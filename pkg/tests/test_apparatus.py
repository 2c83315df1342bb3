import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasetomo.apparatus import (
    AnglePlan,
    ApparatusConfig,
    CountHistogram,
    classical_trajectory,
    coverage_voltage_ratio,
    detector_grid,
    measure,
    omega,
    plan_angles,
    resolution,
    smooth_histogram,
    theta_max,
    theta_of_y,
    y_of_theta,
)
from phasetomo.errors import CoverageError, NearCoverageWarning, ValidationError
from phasetomo.phase_space import (
    GridSpec,
    density_from_wavefunction,
    make_double_slit,
    marginal,
    wigner_from_density,
)

E_CHARGE = 1.602176634e-19
E_MASS = 9.1093837015e-31


def config(**kw):
    base = dict(v0=2650.0, box_half_length=0.1, accel_potential=500.0, particle_charge_mag=E_CHARGE,
                particle_mass=E_MASS, n_detector_bins=256, total_counts_per_angle=10_000,
                detector_pitch=0.2, detector_span=GridSpec(256, 12.0).span)
    base.update(kw)
    return ApparatusConfig(**base)


def test_omega_matches_hand_computation():
    expected = math.sqrt(2 * 2650.0 * E_CHARGE / (0.1**2 * E_MASS))
    assert omega(config()) == pytest.approx(expected, rel=1e-12)


def test_theta_max_for_the_classic_box():
    # V0 / V_accel = 2.3^2 gives sinh(theta_max) = 2.3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearCoverageWarning)
        cfg = config(v0=500.0 * 2.3**2)
    assert theta_max(cfg) == pytest.approx(math.asinh(2.3), rel=1e-12)
    assert coverage_voltage_ratio() == pytest.approx(math.sinh(math.pi / 2) ** 2, rel=1e-15)


def test_insufficient_voltage_is_a_coverage_error():
    with pytest.raises(CoverageError):
        config(v0=2000.0)


def test_near_coverage_warns():
    with pytest.warns(NearCoverageWarning):
        config(v0=500.0 * 2.3**2)


def test_partial_coverage_allowed_when_not_required():
    cfg = config(v0=1000.0, full_coverage=False)
    assert theta_max(cfg) < math.pi / 2


@pytest.mark.parametrize("field,value", [("v0", -1.0), ("box_half_length", 0.0), ("detector_pitch", float("nan")),
                                         ("n_detector_bins", 2.5), ("total_counts_per_angle", 0)])
def test_config_validation(field, value):
    with pytest.raises(ValidationError):
        config(**{field: value})


def test_angle_map_endpoints_and_bounds():
    cfg = config()
    assert theta_of_y(0.0, cfg) == 0.0
    assert theta_of_y(1.0, cfg) == pytest.approx(theta_max(cfg), rel=1e-14)
    assert theta_of_y(-1.0, cfg) == pytest.approx(-theta_max(cfg), rel=1e-14)
    with pytest.raises(ValidationError):
        theta_of_y(1.01, cfg)


@given(st.floats(-1.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_angle_map_is_odd_monotone_and_invertible(y):
    cfg = config()
    th = theta_of_y(y, cfg)
    assert theta_of_y(-y, cfg) == pytest.approx(-th, abs=1e-15)
    assert y_of_theta(th, cfg) == pytest.approx(y, abs=1e-12)
    assert theta_of_y(min(y + 1e-3, 1.0), cfg) >= th


def test_classical_trajectory_is_cosine_of_phase():
    cfg = config()
    y = np.linspace(-1, 1, 11)
    assert np.allclose(classical_trajectory(y, cfg), np.cos(np.arcsinh(y * math.sinh(theta_max(cfg)))))


def test_resolution_is_shot_noise_or_pitch():
    assert resolution(config(detector_span=16.0, total_counts_per_angle=100, detector_pitch=0.01)) == pytest.approx(0.16)
    assert resolution(config(detector_span=16.0, total_counts_per_angle=10**6)) == 0.2
    with pytest.warns(UserWarning):
        resolution(config(total_counts_per_angle=1))


def test_detector_grid_cells_tile_the_span():
    cfg = config()
    g = detector_grid(cfg)
    assert g.n_points == 256
    assert g.span == pytest.approx(cfg.detector_span, rel=1e-14)


def test_angle_plan_covers_half_turn():
    plan = plan_angles(config(), 64)
    assert len(plan) == 64
    assert plan.thetas[0] == -math.pi / 2 and plan.thetas[-1] == math.pi / 2
    assert np.all(np.diff(plan.thetas) > 0)
    assert np.all(np.abs(plan.y_positions) <= 1)
    assert len(plan_angles(config(), 3)) == 8


def test_default_angle_count_balances_span_and_resolution():
    cfg = config(detector_pitch=0.5)
    assert len(plan_angles(cfg)) == math.ceil(cfg.detector_span / 0.5)


def test_near_coverage_plan_clips_to_box_wall():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearCoverageWarning)
        cfg = config(v0=500.0 * 2.3**2)
    with pytest.warns(NearCoverageWarning):
        plan = plan_angles(cfg, 16)
    assert plan.y_positions[-1] == 1.0


def test_angle_plan_validation():
    with pytest.raises(ValidationError):
        AnglePlan(np.array([0.0, 0.0]), np.array([0.0, 0.1]))
    with pytest.raises(ValidationError):
        AnglePlan(np.array([0.0, 1.0]), np.array([0.0, 1.5]))


@pytest.fixture(scope="module")
def slit_marginal():
    g = GridSpec(256, 12.0)
    w = wigner_from_density(density_from_wavefunction(make_double_slit(g, 10, 1.0)))
    return marginal(w, 0.3)


def test_measure_is_deterministic_per_seed_and_stream(slit_marginal):
    cfg = config()
    g = GridSpec(256, 12.0)
    a = measure(slit_marginal, cfg, seed=5, stream=2, grid=g)
    b = measure(slit_marginal, cfg, seed=5, stream=2, grid=g)
    c = measure(slit_marginal, cfg, seed=5, stream=3, grid=g)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)
    assert a.counts.sum() == cfg.total_counts_per_angle


def test_measure_mean_follows_marginal(slit_marginal):
    cfg = config(total_counts_per_angle=10**7)
    g = GridSpec(256, 12.0)
    h = measure(slit_marginal, cfg, seed=0, grid=g)
    p = slit_marginal.density * g.dx
    expected_sd = np.sqrt(cfg.total_counts_per_angle * p * (1 - p)).max()
    assert np.max(np.abs(h.counts - cfg.total_counts_per_angle * p)) < 6 * expected_sd


def test_smoothed_histogram_is_a_normalized_density(slit_marginal):
    cfg = config()
    g = GridSpec(256, 12.0)
    m = smooth_histogram(measure(slit_marginal, cfg, seed=1, grid=g), cfg)
    assert np.sum(m.density) * g.dx == pytest.approx(1.0, abs=1e-12)
    assert m.theta == slit_marginal.theta


def test_count_histogram_validation():
    g = GridSpec(16, 1.0)
    with pytest.raises(ValidationError):
        CountHistogram(g, np.ones(16), 0.0, 15)
    with pytest.raises(ValidationError):
        CountHistogram(g, -np.ones(16), 0.0, -16)


def test_config_is_immutable():
    cfg = config()
    with pytest.raises(Exception):
        cfg.v0 = 1.0
    assert replace(cfg, total_counts_per_angle=7).total_counts_per_angle == 7
