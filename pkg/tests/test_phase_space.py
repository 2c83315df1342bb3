import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (
    double_slit_momentum_density,
    double_slit_psi,
    gaussian_wigner,
    quadrature_wigner,
)
from phasetomo.errors import GridMismatchError, MassLossWarning, SupportError, ValidationError
from phasetomo.phase_space import (
    DensityMatrix,
    GridSpec,
    MarginalDistribution,
    WavefunctionGrid,
    WignerGrid,
    decohere,
    density_from_wavefunction,
    density_from_wigner,
    make_double_slit,
    make_gaussian,
    marginal,
    mixture,
    momentum_density,
    purity,
    purity_from_wigner,
    rotate_wigner,
    shear_wigner,
    wigner_from_density,
)

GROUND = GridSpec(256, 8.0)
SLIT = GridSpec(256, 12.0)
SMALL = GridSpec(96, 8.0)


@pytest.fixture(scope="module")
def slit_state():
    rho = density_from_wavefunction(make_double_slit(SLIT, 10, 1.0))
    return rho, wigner_from_density(rho)


# ---------------------------------------------------------------- grid


def test_grid_rejects_small_or_bad_sizes():
    with pytest.raises(ValidationError):
        GridSpec(8, 1.0)
    with pytest.raises(ValidationError):
        GridSpec(32, -1.0)
    with pytest.raises(ValidationError):
        GridSpec(32.5, 1.0)


@given(n=st.integers(16, 80), x_max=st.floats(1.0, 20.0))
@settings(max_examples=25, deadline=None)
def test_frequencies_form_exact_dft_pair(n, x_max):
    g = GridSpec(n, x_max)
    e = np.exp(1j * np.outer(g.frequencies(), g.points()))
    gram = e @ e.conj().T * g.dx * g.dk / (2 * np.pi)
    assert np.allclose(gram, np.eye(n), atol=1e-10)
    assert g.frequencies()[n // 2] == 0.0


# --------------------------------------------------------------- states


def test_support_error_when_state_leaves_grid():
    with pytest.raises(SupportError):
        make_gaussian(GridSpec(64, 3.0), 0.0, 1.0)
    with pytest.raises(SupportError):
        make_double_slit(GridSpec(128, 9.0), 10, 1.0)


def test_wavefunction_must_be_normalized():
    with pytest.raises(ValidationError):
        WavefunctionGrid(SMALL, np.ones(SMALL.n_points))


def test_density_requires_pure_state_input():
    rho = density_from_wavefunction(make_gaussian(SMALL, 0, 1))
    with pytest.raises(TypeError):
        density_from_wavefunction(rho)


def test_mixture_weights_validated():
    a = make_gaussian(SMALL, -1, 1)
    with pytest.raises(ValidationError):
        mixture([a], [0.5])


def test_double_slit_normalized_and_pure():
    rho = density_from_wavefunction(make_double_slit(SLIT, 10, 1.0))
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    assert purity(rho) == pytest.approx(1.0, abs=1e-12)


# -------------------------------------------------------------- Wigner


def test_gaussian_wigner_matches_closed_form():
    c, s, p0 = 0.7, 0.9, -1.2
    rho = density_from_wavefunction(make_gaussian(GROUND, c, s, p0))
    w = wigner_from_density(rho)
    X, P = np.meshgrid(GROUND.points(), GROUND.points(), indexing="ij")
    # residual set by the packet tail cut at the grid edge (|psi| ~ 1e-4 there)
    assert np.max(np.abs(w.values - gaussian_wigner(X, P, c, s, p0))) < 1e-8


def test_plane_wave_sign_convention():
    w = wigner_from_density(density_from_wavefunction(make_gaussian(GROUND, 0, 1.0, momentum=2.0)))
    p = GROUND.points()
    mean_p = np.sum(w.p_marginal() * p) * GROUND.dx
    assert mean_p == pytest.approx(2.0, abs=1e-9)


def test_double_slit_wigner_matches_quadrature(slit_state):
    _, w = slit_state
    idx = np.arange(0, SLIT.n_points, 17)
    x = SLIT.points()[idx]
    ref = quadrature_wigner(lambda t: double_slit_psi(t), x, x)
    # agreement limited by the finite grid cutting the lobe tails at |x| = 12
    assert np.max(np.abs(w.values[np.ix_(idx, idx)] - ref)) < 2e-7


def test_wigner_marginals_are_position_and_momentum_densities(slit_state):
    rho, w = slit_state
    psi = make_double_slit(SLIT, 10, 1.0)
    assert w.mass() == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(w.x_marginal() - psi.position_density())) < 1e-8
    assert np.max(np.abs(w.p_marginal() - momentum_density(psi))) < 1e-12


def test_non_hermitian_rejected():
    el = np.eye(SMALL.n_points, dtype=complex) / (SMALL.n_points * SMALL.dx)
    el[0, 1] = 0.3
    with pytest.raises(ValidationError):
        wigner_from_density(DensityMatrix(SMALL, el))


states = st.lists(
    st.tuples(st.floats(-2, 2), st.floats(0.5, 1.0), st.floats(-1.5, 1.5), st.floats(0.1, 1.0)),
    min_size=1, max_size=3,
)


@given(states)
@settings(max_examples=20, deadline=None)
def test_round_trip_density_wigner_density(components):
    psis = [make_gaussian(SMALL, c, s, p) for c, s, p, _ in components]
    weights = np.array([w for *_, w in components])
    rho = mixture(psis, weights / weights.sum())
    back = density_from_wigner(wigner_from_density(rho))
    assert np.max(np.abs(back.elements - rho.elements)) < 1e-6
    assert purity_from_wigner(wigner_from_density(rho)) == pytest.approx(purity(rho), abs=1e-9)


def test_double_slit_round_trip(slit_state):
    rho, w = slit_state
    assert np.max(np.abs(density_from_wigner(w).elements - rho.elements)) < 1e-6


def test_non_square_wigner_has_no_grid():
    w = WignerGrid(SMALL, GridSpec(96, 7.0), np.zeros((96, 96)))
    with pytest.raises(GridMismatchError):
        _ = w.grid


# ---------------------------------------------------------- rotation


def test_quarter_turn_gives_momentum_distribution(slit_state):
    _, w = slit_state
    ref = double_slit_momentum_density(SLIT.points())
    m = marginal(rotate_wigner(w, math.pi / 2), 0.0)
    assert np.sum(np.abs(m.density - ref)) * SLIT.dx < 2e-3


@given(st.floats(-math.pi, math.pi))
@settings(max_examples=10, deadline=None)
def test_ground_state_rotation_invariant(theta):
    w = wigner_from_density(density_from_wavefunction(make_gaussian(GROUND, 0, 1 / math.sqrt(2))))
    assert np.max(np.abs(rotate_wigner(w, theta).values - w.values)) < 1e-6


def test_rotation_conserves_mass_and_full_turn_is_identity(slit_state):
    _, w = slit_state
    assert rotate_wigner(w, 0.7).mass() == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(rotate_wigner(w, 2 * math.pi).values, rotate_wigner(w, 0.0).values)


def test_shear_warns_on_mass_loss():
    w = wigner_from_density(density_from_wavefunction(make_gaussian(SMALL, 0, 1.0, momentum=3.0)))
    with pytest.warns(MassLossWarning):
        shear_wigner(w, 3.0)


def test_marginal_theta_zero_is_position_density(slit_state):
    rho, w = slit_state
    m = marginal(w, 0.0)
    assert np.max(np.abs(m.density - rho.diagonal())) < 1e-8


def test_marginal_distribution_validates():
    with pytest.raises(ValidationError):
        MarginalDistribution(SMALL, -np.ones(96), 0.0)
    with pytest.raises(ValidationError):
        MarginalDistribution(SMALL, np.ones(96), 0.0)


# -------------------------------------------------------- decoherence


def test_decoherence_preserves_diagonal_and_is_identity_at_zero(slit_state):
    rho, _ = slit_state
    assert np.array_equal(decohere(rho, 0.0).elements, rho.elements)
    d = decohere(rho, 10.0)
    assert np.array_equal(d.diagonal(), rho.diagonal())


def test_which_side_decoherence_halves_purity(slit_state):
    rho, _ = slit_state
    assert purity(decohere(rho, 10.0)) == pytest.approx(0.5, abs=1e-3)


def test_position_kernel_destroys_lobe_coherence_too(slit_state):
    # the Gaussian kernel exp(-lam (x - x')^2) also damps coherence inside each lobe
    rho, _ = slit_state
    assert purity(decohere(rho, 10.0, observable="position")) == pytest.approx(0.0556, abs=1e-3)


@given(st.floats(0.0, 50.0))
@settings(max_examples=15, deadline=None)
def test_decoherence_never_raises_purity(lam):
    rho = density_from_wavefunction(make_double_slit(GridSpec(128, 12.0), 10, 1.0))
    assert purity(decohere(rho, lam)) <= purity(rho) + 1e-12


def test_decoherence_rejects_bad_arguments(slit_state):
    rho, _ = slit_state
    with pytest.raises(ValidationError):
        decohere(rho, -1.0)
    with pytest.raises(ValidationError):
        decohere(rho, 1.0, observable="spin")


# ------------------------------------------------------- further examples


def test_boosted_packet_momentum_peak():
    w = wigner_from_density(density_from_wavefunction(make_gaussian(GROUND, 0.0, 1 / math.sqrt(2), 2.0)))
    p_marg = w.values.sum(axis=0) * GROUND.dx
    assert GROUND.points()[np.argmax(p_marg)] == pytest.approx(2.0, abs=GROUND.dx)


def test_shear_spreads_ground_state():
    w = wigner_from_density(density_from_wavefunction(make_gaussian(GROUND, 0.0, 1 / math.sqrt(2))))
    x = GROUND.points()
    sheared = shear_wigner(w, 1.0)
    x2 = np.sum(sheared.values * x[:, None] ** 2) * GROUND.dx**2
    assert x2 == pytest.approx(1.0, abs=1e-3)
    assert np.max(np.abs(sheared.values.sum(axis=0) - w.values.sum(axis=0))) * GROUND.dx < 1e-6


def test_orthogonal_mixture_purity_and_wigner_cross_check():
    a = make_gaussian(SLIT, -5.0, 1.0)
    b = make_gaussian(SLIT, 5.0, 1.0)
    rho = mixture([a, b], [0.5, 0.5])
    assert purity(rho) == pytest.approx(0.5, abs=1e-6)
    assert purity_from_wigner(wigner_from_density(rho)) == pytest.approx(purity(rho), abs=1e-4)


def test_incoherent_mixture_has_no_central_ridge():
    rho = mixture([make_gaussian(SLIT, -5.0, 1.0), make_gaussian(SLIT, 5.0, 1.0)], [0.5, 0.5])
    w = wigner_from_density(rho)
    centre = np.argmin(np.abs(SLIT.points()))
    assert np.max(np.abs(w.values[centre])) < 0.05 * np.max(w.values)


def test_wigner_bounded_by_inverse_pi(slit_state):
    _, w = slit_state
    assert np.max(np.abs(w.values)) <= 1 / math.pi + 1e-9
