"""Constrained heat evolution: decay rates, dissipation margins, transport."""

import json

import numpy as np
import pytest

from buckstokes.evolution import (
    EvolutionTrace,
    dissipation_check,
    evolution_csv,
    evolution_json,
    stokes_heat_evolve,
    transport_residual,
)
from buckstokes.geometry import Disc, Ellipse, build_mesh
from buckstokes.spaces import FieldFunction, P2Space, interpolate
from buckstokes.spectra import stokes_spectrum

DISC = Disc(1.0)
ELLIPSE = Ellipse(1.5, 1.0)


@pytest.fixture(scope="module")
def disc_stokes():
    return stokes_spectrum(DISC, 0.15, k=2)


@pytest.fixture(scope="module")
def ellipse_stokes():
    return stokes_spectrum(ELLIPSE, 0.15, k=1)


@pytest.fixture(scope="module")
def disc_trace(disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    return stokes_heat_evolve(disc_stokes.modes[0].velocity, 1.0, lambda1s=lam)


def test_eigenfunction_decays_at_spectral_rate(disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    for nu in (0.5, 1.0):
        trace = stokes_heat_evolve(disc_stokes.modes[0].velocity, nu, lambda1s=lam)
        assert abs(trace.decay_rate_fit - 2.0 * nu * lam) <= 0.02 * 2.0 * nu * lam


def test_doubling_viscosity_doubles_the_rate(disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    u = disc_stokes.modes[0].velocity
    r1 = stokes_heat_evolve(u, 0.5, lambda1s=lam).decay_rate_fit
    r2 = stokes_heat_evolve(u, 1.0, lambda1s=lam).decay_rate_fit
    assert abs(r2 - 2.0 * r1) <= 1e-6 * r2


def test_spatial_profile_is_preserved(disc_trace):
    assert disc_trace.shape_drift <= 0.01


def test_energy_strictly_decreasing(disc_trace):
    assert np.all(np.diff(disc_trace.energy) < 0)


def test_divergence_stays_within_solver_tolerance(disc_trace):
    assert disc_trace.divergence_residual.max() <= 1e-9


def test_first_mode_margin_is_tight(disc_trace, disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    e0 = disc_trace.energy[0]
    assert disc_trace.dissipation_margin >= -1e-3 * e0
    assert abs(disc_trace.dissipation_margin) <= 0.02 * e0
    assert dissipation_check(disc_trace, lam, 1.0) == disc_trace.dissipation_margin


def test_second_mode_decays_strictly_faster(disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    trace = stokes_heat_evolve(disc_stokes.modes[1].velocity, 1.0, lambda1s=lam)
    assert trace.dissipation_margin > 0


def test_zero_initial_data_stays_zero(disc_stokes):
    space = disc_stokes.modes[0].velocity[0].space
    zero = FieldFunction(space, np.zeros(space.dof_count))
    trace = stokes_heat_evolve((zero, zero), 1.0, dt=0.01, T=0.2, lambda1s=1.0)
    assert trace.energy.max() == 0.0
    assert trace.decay_rate_fit == 0.0
    assert trace.dissipation_margin == 0.0
    assert trace.shape_drift == 0.0


def test_halving_dt_quarters_the_rate_error(disc_stokes):
    lam = float(disc_stokes.eigenvalues[0])
    u = disc_stokes.modes[0].velocity
    horizon = 3.0 / (2.0 * lam)
    errors = []
    for refine in (1, 2):
        trace = stokes_heat_evolve(u, 1.0, dt=horizon / (60 * refine), T=horizon, lambda1s=lam)
        errors.append(abs(trace.decay_rate_fit - 2.0 * lam))
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_transport_residual_dichotomy(disc_stokes, ellipse_stokes):
    disc_value = transport_residual(
        disc_stokes.modes[0].velocity, disc_stokes.modes[0].vorticity
    )
    ellipse_value = transport_residual(
        ellipse_stokes.modes[0].velocity, ellipse_stokes.modes[0].vorticity
    )
    assert disc_value <= 0.02
    assert ellipse_value >= 0.05


def test_rigid_rotation_advects_radial_field_exactly():
    mesh = build_mesh(DISC, 0.2)
    p2 = P2Space(mesh)
    ux = interpolate(p2, lambda p: -p[:, 1])
    uy = interpolate(p2, lambda p: p[:, 0])
    radial = interpolate(p2, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    assert transport_residual((ux, uy), radial) <= 1e-12


def test_zero_velocity_gives_zero_residual():
    mesh = build_mesh(DISC, 0.2)
    p2 = P2Space(mesh)
    zero = FieldFunction(p2, np.zeros(p2.dof_count))
    assert transport_residual((zero, zero)) == 0.0


def test_step_size_and_argument_validation(disc_stokes):
    u = disc_stokes.modes[0].velocity
    with pytest.raises(ValueError):
        stokes_heat_evolve(u, 1.0, dt=0.5, T=1.0)  # dt > T/10
    with pytest.raises(ValueError):
        stokes_heat_evolve(u, -1.0, dt=0.01, T=1.0)
    with pytest.raises(ValueError):
        stokes_heat_evolve(u, 1.0)  # no horizon and no eigenvalue
    other = P2Space(u[0].space.mesh)
    with pytest.raises(ValueError):
        stokes_heat_evolve((u[0], FieldFunction(other, u[1].coefficients.copy())), 1.0, lambda1s=1.0)


def test_trace_validation_rejects_bad_histories(disc_trace):
    with pytest.raises(ValueError):
        EvolutionTrace(
            domain=disc_trace.domain,
            nu=1.0,
            dt=0.1,
            times=np.array([0.0, 0.2, 0.1]),
            energy=np.array([1.0, 0.5, 0.4]),
            divergence_residual=np.zeros(3),
            decay_rate_fit=0.0,
            transport_residual=0.0,
            shape_drift=0.0,
        )


def test_csv_and_json_serialization(disc_trace):
    text = evolution_csv(disc_trace)
    assert "\r" not in text
    lines = text.strip().split("\n")
    assert lines[0] == "t,E,divergence_residual"
    assert len(lines) == disc_trace.times.size + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == disc_trace.energy[0]

    doc = json.loads(evolution_json(disc_trace))
    assert doc["domain"]["kind"] == "disc"
    assert doc["steps"] == disc_trace.times.size - 1
    assert doc["decay_rate_fit"] == disc_trace.decay_rate_fit
    assert doc["dissipation_margin"] == disc_trace.dissipation_margin
    assert doc["max_divergence_residual"] == disc_trace.divergence_residual.max()
