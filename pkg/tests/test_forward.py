import time

import numpy as np
import pytest

from tofinv.forward import boundary_trace, solve_heat, time_of_flight
from tofinv.model import DomainError, FluxProfile, MaterialProps, TemperatureField, make_grid

from conftest import TOF_26C


def energy_audit(props, grid, q, T0=26.0):
    """|rho c int (T - T0) dx - int_0^t q ds| with an exact antiderivative of q."""
    field = solve_heat(props, grid, FluxProfile(q(grid.t)), T0)
    stored = props.heat_capacity * (grid.space_weights @ (field.values - T0))
    return stored


def smooth_flux(t, tau=500.0):
    return 1e5 * (1.0 + 0.5 * np.sin(2 * np.pi * t / tau))


def smooth_flux_integral(t, tau=500.0):
    return 1e5 * (t + 0.5 * tau / (2 * np.pi) * (1.0 - np.cos(2 * np.pi * t / tau)))


def test_zero_flux_preserves_uniform_state(props):
    g = make_grid(0.05, 500.0, 100, 500)
    f = solve_heat(props, g, FluxProfile.constant(0.0, g), 26.0)
    assert np.array_equal(f.values, np.full_like(f.values, 26.0))


def test_initial_column_is_initial_condition(props, small_grid):
    f = solve_heat(props, small_grid, FluxProfile.constant(1e5, small_grid), 26.0)
    assert np.all(f.values[:, 0] == 26.0)


def test_mean_temperature_rise_rate(props):
    g = make_grid(0.05, 500.0, 100, 500)
    f = solve_heat(props, g, FluxProfile.constant(1e5, g), 26.0)
    mean_T = g.space_weights @ f.values / g.L
    late = g.t >= 300.0
    rate = np.polyfit(g.t[late], mean_T[late], 1)[0]
    assert rate == pytest.approx(1e5 / (7800 * 400 * 0.05), rel=1e-9)
    assert rate == pytest.approx(0.641, abs=5e-4)


def test_discrete_energy_balance_is_exact(props, rng):
    # trapezoid in space against trapezoid in time: exact for any flux
    g = make_grid(0.03, 200.0, 17, 40)
    q = rng.uniform(0.0, 2e5, g.N + 1)
    f = solve_heat(props, g, FluxProfile(q), 26.0)
    stored = props.heat_capacity * (g.space_weights @ (f.values - 26.0))
    supplied = np.concatenate([[0.0], np.cumsum(0.5 * g.dt * (q[1:] + q[:-1]))])
    np.testing.assert_allclose(stored, supplied, rtol=1e-10, atol=1e-6)


def test_energy_audit_second_order(props):
    errs = []
    for M, N in [(10, 25), (20, 50), (40, 100), (80, 200)]:
        g = make_grid(0.05, 500.0, M, N)
        stored = energy_audit(props, g, smooth_flux)
        errs.append(np.max(np.abs(stored - smooth_flux_integral(g.t))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_nonnegative_flux_never_cools(props, rng):
    g = make_grid(0.05, 500.0, 40, 100)
    q = rng.uniform(0.0, 1e5, g.N + 1)
    f = solve_heat(props, g, FluxProfile(q), 26.0)
    assert f.values.min() >= 26.0 - 1e-12


def test_solve_heat_runtime(props):
    g = make_grid(0.05, 500.0, 100, 500)
    q = FluxProfile.constant(1e5, g)
    solve_heat(props, g, q, 26.0)
    g2 = g.with_thickness(0.0499)
    t0 = time.perf_counter()
    solve_heat(props, g2, q, 26.0)
    assert time.perf_counter() - t0 < 1.0


def test_time_of_flight_uniform(props):
    g = make_grid(0.05, 500.0, 100, 500)
    f = TemperatureField(g, np.full((101, 501), 26.0))
    lam = time_of_flight(f, props).values
    assert np.floor(lam[0] * 1e11) / 1e11 == pytest.approx(3.078679e-5, rel=1e-12)
    np.testing.assert_allclose(lam, TOF_26C, rtol=1e-12)


def test_time_of_flight_velocity_independent_of_temperature(small_grid, rng):
    props = MaterialProps(7800, 400, 50, 0.0, 3259.9)
    f = TemperatureField(small_grid, 26.0 + 300.0 * rng.random((21, 21)))
    np.testing.assert_allclose(time_of_flight(f, props).values, 0.1 / 3259.9, rtol=1e-13)


def test_hotter_wall_is_slower(props, small_grid, rng):
    base = 26.0 + 100.0 * rng.random((21, 21))
    hot = base + 1.0 + rng.random((21, 21))
    lam0 = time_of_flight(TemperatureField(small_grid, base), props).values
    lam1 = time_of_flight(TemperatureField(small_grid, hot), props).values
    assert np.all(lam1 > lam0)


def test_time_of_flight_quadrature_order(props):
    Ta, Tb, L = 400.0, 30.0, 0.05
    Va, Vb = props.velocity(Ta), props.velocity(Tb)
    exact = 2.0 * L / (props.a * (Tb - Ta)) * np.log(Vb / Va)
    errs = []
    for M in (4, 8, 16, 32, 64):
        g = make_grid(L, 1.0, M, 1)
        T = Ta + (Tb - Ta) * g.x / L
        lam = time_of_flight(TemperatureField(g, np.column_stack([T, T])), props).values[0]
        errs.append(abs(lam - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_non_positive_velocity_is_reported(props, small_grid):
    T = np.full((21, 21), 26.0)
    T[3, 7] = 8000.0
    with pytest.raises(DomainError, match="node 3, instant 7"):
        time_of_flight(TemperatureField(small_grid, T), props)


def test_boundary_trace(props):
    g = make_grid(0.05, 500.0, 100, 500)
    f = solve_heat(props, g, FluxProfile.constant(1e5, g), 26.0)
    tr = boundary_trace(f).values
    assert tr[-1] == f.values[100, 500]
    np.testing.assert_array_equal(tr, f.values[-1])
    f0 = solve_heat(props, g, FluxProfile.constant(0.0, g), 26.0)
    assert np.all(boundary_trace(f0).values == 26.0)
