"""Lagrangian solver behaviour for both model problems."""

import numpy as np
import pytest

from meshenkf import (
    AdaptiveMesh,
    ModelSpec,
    ModelState,
    SolverBlowUpError,
    bgm_initial_condition,
    bgm_spec,
    initial_state,
    integrate,
    is_valid,
    ksm_initial_condition,
    ksm_spec,
    step,
)
from meshenkf.models import deriv1, deriv2, deriv4


def test_default_specs_match_standard_settings():
    b = bgm_spec()
    assert b.kind == "bgm"
    assert b.viscosity == 0.008
    assert b.dt == 1e-3
    assert b.tolerances.delta1 == 0.01
    assert b.tolerances.delta2 == 0.02
    assert b.tolerances.domain_length == 1.0

    k = ksm_spec()
    assert k.kind == "ksm"
    assert k.viscosity == 0.027
    assert k.dt == 1e-5
    assert k.tolerances.delta1 == pytest.approx(0.02 * np.pi)
    assert k.tolerances.delta2 == pytest.approx(0.04 * np.pi)
    assert k.tolerances.domain_length == pytest.approx(2 * np.pi)


def test_initial_conditions_frozen_values():
    # sin(pi/2) + 0.5 sin(pi/4)
    assert bgm_initial_condition(0.25) == pytest.approx(1.3535533905932737, abs=1e-15)
    assert bgm_initial_condition(0.0) == pytest.approx(0.0, abs=1e-15)
    assert ksm_initial_condition(0.25) == pytest.approx(-1.0, abs=1e-15)


def test_initial_state_uniform_mesh():
    st = initial_state(bgm_spec(), 100)
    assert st.mesh.n_nodes == 100
    np.testing.assert_allclose(st.mesh.nodes, np.arange(100) * 0.01)
    np.testing.assert_allclose(st.u, bgm_initial_condition(st.mesh.nodes))
    assert st.t == 0.0


def test_initial_state_rejects_spacing_outside_tolerances():
    with pytest.raises(ValueError):
        initial_state(bgm_spec(), 30)  # spacing 1/30 > delta2
    with pytest.raises(ValueError):
        initial_state(bgm_spec(), 300)  # spacing 1/300 < delta1


def test_model_spec_validation():
    tol = bgm_spec().tolerances
    with pytest.raises(ValueError):
        ModelSpec("xxx", 0.008, 1e-3, tol, bgm_initial_condition)
    with pytest.raises(ValueError):
        ModelSpec("bgm", 0.008, -1e-3, tol, bgm_initial_condition)
    with pytest.raises(ValueError):
        ModelSpec("bgm", -0.008, 1e-3, tol, bgm_initial_condition)


def test_integrate_zero_duration_is_identity():
    st = initial_state(bgm_spec(), 100)
    out = integrate(st, bgm_spec(), 0.0)
    np.testing.assert_array_equal(out.mesh.nodes, st.mesh.nodes)
    np.testing.assert_array_equal(out.u, st.u)
    assert out.t == st.t


def test_integrate_requires_divisible_duration():
    st = initial_state(bgm_spec(), 100)
    with pytest.raises(ValueError):
        integrate(st, bgm_spec(), 0.0015)
    # a whole number of steps is fine
    integrate(st, bgm_spec(), 0.005)


def test_derivative_stencils_on_smooth_field():
    z = np.arange(200) * (2 * np.pi / 200)
    u = np.sin(z)
    d1 = deriv1(z, u, 2 * np.pi)
    d2 = deriv2(z, u, 2 * np.pi)
    np.testing.assert_allclose(d1, np.cos(z), atol=5e-4)
    np.testing.assert_allclose(d2, -np.sin(z), atol=5e-3)
    d4 = deriv4(z, u, 2 * np.pi)
    np.testing.assert_allclose(d4, np.sin(z), atol=5e-2)


def test_fixed_grid_step_matches_uniform_stencil_formulas():
    """With node advection off, one step must equal the classic explicit
    Euler update computed here with uniform-grid formulas."""
    spec = bgm_spec()
    fixed = ModelSpec(
        spec.kind,
        spec.viscosity,
        spec.dt,
        spec.tolerances,
        spec.initial_condition,
        advect_nodes=False,
    )
    st = initial_state(fixed, 100)
    h = 0.01
    u = st.u
    up, um = np.roll(u, -1), np.roll(u, 1)
    expected = u + spec.dt * (
        spec.viscosity * (up - 2 * u + um) / h**2 - u * (up - um) / (2 * h)
    )
    out = step(st, fixed)
    np.testing.assert_array_equal(out.mesh.nodes, st.mesh.nodes)
    np.testing.assert_allclose(out.u, expected, rtol=1e-12, atol=1e-15)


def test_advecting_step_moves_nodes_and_keeps_mesh_valid():
    spec = bgm_spec()
    st = initial_state(spec, 100)
    out = st
    for _ in range(50):
        out = step(out, spec)
    assert is_valid(out.mesh)
    assert not np.array_equal(out.mesh.nodes, st.mesh.nodes)
    assert out.t == pytest.approx(0.05)
    assert np.isfinite(out.u).all()


def test_bgm_front_steepens_then_dissipates():
    spec = bgm_spec()
    st = initial_state(spec, 100)
    end = integrate(st, spec, 2.0)
    # viscosity wins eventually: amplitude decays well below the initial 1.35
    assert np.abs(end.u).max() < np.abs(st.u).max()
    assert np.abs(end.u).max() < 0.6
    assert is_valid(end.mesh)


def test_ksm_short_run_stays_finite_on_valid_mesh():
    spec = ksm_spec()
    st = initial_state(spec, 100)
    out = integrate(st, spec, 0.01)
    assert is_valid(out.mesh)
    assert np.isfinite(out.u).all()


def test_blow_up_raises_with_time_attached():
    # alternating near-overflow values make the diffusion stencil overflow
    # in a single step
    spec = bgm_spec()
    mesh = AdaptiveMesh(np.arange(100) * 0.01, spec.tolerances)
    u = np.where(np.arange(100) % 2 == 0, 1e305, -1e305)
    st = ModelState(mesh, u, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(SolverBlowUpError) as err:
            step(st, spec)
        assert err.value.time == pytest.approx(spec.dt)
        with pytest.raises(SolverBlowUpError):
            integrate(st, spec, 0.005)


def test_model_state_requires_aligned_finite_values(bgm_tol):
    mesh = AdaptiveMesh(np.arange(100) * 0.01, bgm_tol)
    with pytest.raises(ValueError):
        ModelState(mesh, np.zeros(5), 0.0)
    bad = np.zeros(100)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        ModelState(mesh, bad, 0.0)
