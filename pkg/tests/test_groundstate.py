"""Constraint projections, the three minimization problems and verification."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from hwsnls.experiments import orbit_distance
from hwsnls.functionals import (
    ModelSpec,
    energy,
    energy_excess,
    g_scaling,
    h_scaling,
    hom_half_sq,
    inhom_half_sq,
    mass,
    pohozaev_P,
    pohozaev_Q,
    potential_term,
)
from hwsnls.groundstate import (
    ConstraintError,
    ConstraintSpec,
    SolverOptions,
    energy_on_manifold_form,
    gaussian_seed,
    load_ground_state,
    manifold_dilation_factor,
    minimize_local_ball,
    minimize_nehari,
    minimize_sphere,
    normalize_symmetry,
    project_manifold_dilation,
    project_mass,
    riemannian_gradient,
    standing_wave_profile,
    verify_ground_state,
)
from hwsnls.spectral import ComplexField, DilationError, Grid, dilate, gaussian

from .conftest import random_smooth_field

PROJECTION_FACTOR = 0.751125544464942483  # pi^(-1/4)
LAMBDA_STAR_GAUSS = 2.210485320720768552  # (5 / (3 * ||e^{-x^2/2}||_5^5))^2
SCAN_LAMBDAS = (0.8, 0.9, 1.1, 1.25)

SMALL = Grid(1, 256, 40.0)
HW4 = ModelSpec("hw", 4.0, 1)


def _rdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


# --- constraint specification and projections ---------------------------------


def test_constraint_spec_validation():
    with pytest.raises(ValueError):
        ConstraintSpec(0.0)
    with pytest.raises(ValueError):
        ConstraintSpec(1.0, rho_max=1.0)
    assert ConstraintSpec(0.05, rho_max=1.0).rho_max == 1.0


def test_project_mass_examples():
    u = gaussian(SMALL, width=1.0, amplitude=1.0)
    v = project_mass(u, 1.0)
    assert v.values[SMALL.n_points // 2] == pytest.approx(PROJECTION_FACTOR, rel=1e-13)
    assert mass(v) == pytest.approx(1.0, rel=1e-14)
    assert np.allclose(project_mass(v, 1.0).values, v.values, rtol=1e-15, atol=0)
    with pytest.raises(ValueError):
        project_mass(ComplexField(SMALL, np.zeros(SMALL.shape)), 1.0)


@given(seed=st.integers(0, 2**32 - 1), r=st.floats(1e-3, 1e3))
def test_project_mass_exact(seed, r):
    v = project_mass(random_smooth_field(SMALL, np.random.default_rng(seed)), r)
    assert abs(mass(v) - r) <= 1e-12 * r


def test_manifold_dilation_factor_oracle():
    u = gaussian(Grid(1, 65536, 4000.0), width=1.0, amplitude=1.0)
    lam = manifold_dilation_factor(u, HW4)
    assert lam == pytest.approx(LAMBDA_STAR_GAUSS, rel=1e-6)
    # root of the scaling function h found by bracketing agrees with the closed form
    hom, pot = hom_half_sq(u), potential_term(u, 4.0)
    root = brentq(lambda s: float(h_scaling(s, hom, pot, HW4)), 1.5, 3.0, xtol=1e-15)
    assert root == pytest.approx(lam, rel=1e-12)


def test_manifold_dilation_requires_supercritical_window():
    with pytest.raises(ConstraintError):
        manifold_dilation_factor(gaussian(SMALL), ModelSpec("hw", 2.0, 1))


def test_project_manifold_dilation_contract():
    g = Grid(1, 1024, 80.0)
    u = gaussian(g, width=1.0, amplitude=1.0)
    lam, v = project_manifold_dilation(u, HW4)
    assert abs(pohozaev_P(v, HW4)) <= 1e-8 * hom_half_sq(v)
    assert mass(v) == pytest.approx(mass(u), rel=1e-10)
    lam2, w = project_manifold_dilation(v, HW4)
    assert lam2 == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(w.values - v.values)) <= 1e-8 * np.max(np.abs(v.values))
    for s in (1.05, 1.2, 1.5, 1.8):
        assert pohozaev_P(dilate(u, lam * s), HW4) < 0


def test_project_manifold_dilation_refuses_wide_fields():
    g = Grid(1, 256, 40.0)
    u = gaussian(g, width=3.0, amplitude=0.9)  # needs lambda* = 0.43, spreading mass past the box
    with pytest.raises(DilationError):
        project_manifold_dilation(u, HW4)


@given(seed=st.integers(0, 2**32 - 1), precondition=st.booleans())
def test_riemannian_gradient_is_tangent(seed, precondition):
    u = random_smooth_field(SMALL, np.random.default_rng(seed), kmax=2.0)
    g = riemannian_gradient(u, HW4, precondition=precondition)
    scale = math.sqrt(_rdot(g.values, g.values) * _rdot(u.values, u.values))
    assert abs(_rdot(g.values, u.values)) <= 1e-10 * scale


def test_riemannian_gradient_vanishes_at_minimizer(subcritical_ground_states):
    res = subcritical_ground_states["snls"]
    g = riemannian_gradient(res.field, res.model)
    assert math.sqrt(res.field.grid.integrate(np.abs(g.values) ** 2)) <= 1e-6


# --- sphere problem (L2-subcritical) -------------------------------------------


def test_sphere_problem_refused_above_critical_power():
    with pytest.raises(ConstraintError, match="-infinity"):
        minimize_sphere(1.0, HW4, SMALL)


@pytest.mark.parametrize("name", ["snls", "hw"])
def test_subcritical_ground_states(subcritical_ground_states, name):
    res = subcritical_ground_states[name]
    assert res.converged
    assert res.el_residual <= 1e-6
    assert math.isfinite(res.omega)
    assert abs(res.mass - 1.0) <= 1e-10
    if name == "snls":
        assert abs(res.Q) <= 1e-6
    else:
        assert abs(res.P) <= 1e-6
    assert verify_ground_state(res).passed
    assert res.energy <= energy(gaussian_seed(res.field.grid, 1.0), res.model)


def test_descent_is_monotone(subcritical_ground_states):
    for res in subcritical_ground_states.values():
        objective = np.array([row[1] for row in res.log])
        assert np.all(np.diff(objective) <= 1e-15 * np.abs(objective[1:]))


def test_preconditioning_does_not_change_the_minimizer(subcritical_ground_states):
    res = subcritical_ground_states["snls"]
    plain = minimize_sphere(1.0, res.model, res.field.grid,
                            opts=SolverOptions(precondition=False, max_iter=200_000))
    assert plain.converged
    assert orbit_distance(plain.field, res.field) <= 1e-6


# --- local ball problem (sNLS, supercritical window) ---------------------------


def test_local_ball_minimizer(snls_ground_state):
    res = snls_ground_state
    r = res.constraint.r
    assert res.converged
    assert res.h_half < 0.5
    assert r <= res.h_half**2 < 0.25
    assert res.energy < r / 2
    assert energy_excess(res.field, res.model) < 0
    assert abs(res.Q) <= 1e-6
    assert verify_ground_state(res).passed


def test_local_ball_sub_homogeneity(snls_model):
    # r J_l < l J_r for r < l; with J = r/2 + excess this reads r x_l < l x_r
    rs = (0.02, 0.05, 0.08)
    results = [minimize_local_ball(r, snls_model) for r in rs]
    assert all(res.converged and verify_ground_state(res).passed for res in results)
    ex = [energy_excess(res.field, snls_model) for res in results]
    for i in range(len(rs)):
        for j in range(i + 1, len(rs)):
            assert rs[i] * ex[j] - rs[j] * ex[i] < 0
    per_mass = [x / r for x, r in zip(ex, rs)]
    assert per_mass[0] > per_mass[1] > per_mass[2]


def test_local_ball_reports_missing_interior_minimizer(snls_model):
    res = minimize_local_ball(0.3, snls_model)
    assert not res.converged
    assert "no interior local minimizer" in res.status


def test_local_ball_rejects_wrong_problem():
    with pytest.raises(ConstraintError):
        minimize_local_ball(0.05, ModelSpec("hw", 4.0, 1))
    with pytest.raises(ConstraintError):
        minimize_local_ball(0.05, ModelSpec("snls", 2.0, 1))


# --- Nehari-Pohozaev problem (HW) ----------------------------------------------


def test_nehari_two_dimensional_constraints(hw2d_ground_state, hw2d_model):
    v = hw2d_ground_state.field
    assert hw2d_ground_state.converged
    assert abs(pohozaev_P(v, hw2d_model)) <= 1e-8 * hom_half_sq(v)
    assert abs(mass(v) - 1.0) <= 1e-10
    assert hw2d_ground_state.omega > 0
    assert energy(v, hw2d_model) == pytest.approx(energy_on_manifold_form(v, hw2d_model), rel=1e-8)


def test_nehari_dilation_scan(hw2d_ground_state, hw2d_model):
    v = hw2d_ground_state.field
    hom, m, pot = hom_half_sq(v), mass(v), potential_term(v, hw2d_model.p)
    g1 = float(g_scaling(1.0, hom, m, pot, hw2d_model))
    assert g1 == pytest.approx(energy(v, hw2d_model), rel=1e-12)
    for lam in SCAN_LAMBDAS:
        assert float(g_scaling(lam, hom, m, pot, hw2d_model)) < g1 - 1e-6 * abs(g1)
    lam_hi = np.linspace(1.001, 3.0, 50)
    assert np.all(h_scaling(lam_hi, hom, pot, hw2d_model) < 0)


def test_nehari_one_dimensional_contracts():
    g = Grid(1, 4096, 40.0)
    res = minimize_nehari(1.0, HW4, g)
    v = res.field
    assert res.converged
    assert abs(pohozaev_P(v, HW4)) <= 1e-8 * hom_half_sq(v)
    assert res.omega > 0
    assert energy(v, HW4) == pytest.approx(energy_on_manifold_form(v, HW4), rel=1e-8)


def test_nehari_residual_shrinks_with_box():
    # the algebraic tail of the HW profile leaves an O(L^-2) defect in the
    # discrete Pohozaev multiplier, visible in the residual at fixed resolution
    small = minimize_nehari(1.0, HW4, Grid(1, 4096, 40.0)).el_residual
    large = minimize_nehari(1.0, HW4, Grid(1, 16384, 160.0)).el_residual
    assert large < small / 10


def test_nehari_rejects_wrong_problem():
    with pytest.raises(ConstraintError):
        minimize_nehari(1.0, ModelSpec("snls", 4.0, 1), SMALL)
    with pytest.raises(ConstraintError):
        minimize_nehari(1.0, ModelSpec("hw", 2.0, 1), SMALL)


# --- verification and artifacts -------------------------------------------------


def test_verify_detects_tampering(subcritical_ground_states):
    res = subcritical_ground_states["snls"]
    noise = 0.01 * np.random.default_rng(0).normal(size=res.field.grid.shape)
    tampered = dataclasses.replace(res, field=ComplexField(res.field.grid, res.field.values * (1 + noise)))
    report = verify_ground_state(tampered)
    assert not report.passed
    assert "el_residual" in report.failures()
    assert report.checks["el_residual"][0] > 100 * 1e-6


def test_verify_is_phase_invariant(subcritical_ground_states):
    res = subcritical_ground_states["snls"]
    assert verify_ground_state(res).passed
    rotated = dataclasses.replace(res, field=ComplexField(res.field.grid, np.exp(0.9j) * res.field.values))
    assert verify_ground_state(rotated).passed


def test_save_and_load_round_trip(tmp_path, subcritical_ground_states):
    res = subcritical_ground_states["snls"]
    ledger = res.save(tmp_path / "gs")
    assert ledger.exists()
    back = load_ground_state(tmp_path / "gs")
    assert np.array_equal(back.field.values, res.field.values)
    assert back.omega == res.omega and back.converged == res.converged


def test_normalize_symmetry():
    g = Grid(1, 128, 20.0)
    u = ComplexField(g, np.exp(2.1j) * np.exp(-((g.x - 3.0) ** 2)))
    v = normalize_symmetry(u)
    c = g.n_points // 2
    assert np.argmax(np.abs(v.values)) == c
    assert v.values[c].imag == pytest.approx(0.0, abs=1e-15) and v.values[c].real > 0
    assert mass(v) == pytest.approx(mass(u), rel=1e-14)


def test_standing_wave_profile_solves_equation():
    g = Grid(1, 1024, 40.0)
    model = ModelSpec("snls", 3.0, 1)
    q = standing_wave_profile(g, model, 0.5)
    from hwsnls.functionals import el_residual

    assert el_residual(q, 0.5, model) <= 1e-8
    with pytest.raises(ValueError):
        standing_wave_profile(g, model, -1.5)
    with pytest.raises(ValueError):
        standing_wave_profile(g, HW4, -0.1)
    assert inhom_half_sq(q) > 0 and pohozaev_Q(q, model) == pytest.approx(0.0, abs=1e-6)
