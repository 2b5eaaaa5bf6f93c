import numpy as np
import pytest

from tofinv.adjoint import (
    AdjointField,
    assemble_source,
    delta_lambda,
    fd_gradient,
    gradient_L,
    gradient_q,
    solve_adjoint,
    solve_sensitivity,
)
from tofinv.forward import boundary_trace, solve_heat, time_of_flight
from tofinv.measurement import SynthesisSpec, synthesize
from tofinv.model import DomainError, FluxProfile, MaterialProps, TemperatureField, ValidationError, make_grid
from tofinv.optimize import InverseProblem, evaluate
from tofinv.verify import flux_gradient_errors, smooth_random_flux, thickness_gradient_pair


def uniform_field(grid, T=26.0):
    return TemperatureField(grid, np.full((grid.M + 1, grid.N + 1), T))


def pairing(grid, S, dT):
    """Trapezoid inner product over space and time."""
    return float(grid.space_weights @ (S * dT) @ grid.time_weights)


# ---------------------------------------------------------------- source


def test_source_vanishes_for_matching_data(props, small_grid):
    f = uniform_field(small_grid)
    lam = time_of_flight(f, props).values
    tr = boundary_trace(f).values
    S = assemble_source(lam, lam, tr, tr, f, props, alpha=0.3)
    assert np.all(S == 0.0)


def test_source_vanishes_without_couplings(small_grid, rng):
    props = MaterialProps(7800, 400, 50, 0.0, 3259.9)
    f = uniform_field(small_grid)
    S = assemble_source(rng.random(21), rng.random(21), rng.random(21), rng.random(21), f, props, alpha=0.0)
    assert np.all(S == 0.0)


def test_source_single_instant(props, small_grid):
    f = uniform_field(small_grid)
    res = np.zeros(21)
    res[3] = 1e-9
    S = assemble_source(res, np.zeros(21), np.zeros(21), np.zeros(21), f, props, alpha=0.0)
    expected = 2 * 1e-9 * (-0.4521) / 3248.1454**2
    assert expected == pytest.approx(-8.57e-17, rel=1e-3)
    np.testing.assert_allclose(S[:, 3], expected, rtol=1e-14)
    assert np.all(np.delete(S, 3, axis=1) == 0.0)


def test_source_is_linear_in_each_residual(props, small_grid, rng):
    f = TemperatureField(small_grid, 26.0 + 50 * rng.random((21, 21)))
    r1, r2, t1, t2 = (rng.standard_normal(21) for _ in range(4))
    z = np.zeros(21)

    def S(r, t):
        return assemble_source(r, z, t, z, f, props, alpha=0.7)

    np.testing.assert_allclose(S(r1 + 3 * r2, t1), S(r1, t1) + 3 * S(r2, z), rtol=1e-12, atol=1e-30)
    np.testing.assert_allclose(S(r1, t1 - 2 * t2), S(r1, t1) - 2 * S(z, t2), rtol=1e-12, atol=1e-14)


def test_source_rejects_bad_inputs(props, small_grid):
    f = uniform_field(small_grid)
    with pytest.raises(ValidationError):
        assemble_source(np.zeros(5), np.zeros(5), np.zeros(21), np.zeros(21), f, props, 0.0)
    with pytest.raises(ValidationError):
        assemble_source(np.zeros(21), np.zeros(21), np.ones(21), np.zeros(21), f, props, 1.0, "middle")


# ---------------------------------------------------------------- adjoint


def test_zero_source_gives_zero_adjoint(props, small_grid):
    mu = solve_adjoint(props, small_grid, np.zeros((21, 21)))
    assert np.all(mu.values == 0.0)
    assert np.all(gradient_q(mu) == 0.0)


def test_adjoint_starts_from_zero(props, small_grid, rng):
    mu = solve_adjoint(props, small_grid, rng.standard_normal((21, 21)))
    assert np.all(mu.values[:, 0] == 0.0)
    with pytest.raises(ValidationError):
        AdjointField(small_grid, np.ones((21, 21)))


def test_adjoint_shape_checked(props, small_grid):
    with pytest.raises(ValidationError):
        solve_adjoint(props, small_grid, np.zeros((21, 20)))


@pytest.mark.parametrize("seed", range(5))
def test_discrete_adjointness(props, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(0.04 + 0.02 * rng.random(), 500.0, 20, 20)
    S = rng.standard_normal((21, 21))
    dq = rng.standard_normal(21)
    dT = solve_sensitivity(props, g, dq).values
    mu = solve_adjoint(props, g, S)
    lhs = pairing(g, S, dT)
    rhs = -float(g.time_weights @ (dq * gradient_q(mu)))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_gradient_vanishes_on_perfect_data(props):
    spec = SynthesisSpec(true_q=1e5, accuracy=0.0, M=20, N=20, fine_factor=1)
    problem = InverseProblem(props, synthesize(spec, props), 26.0, 20)
    ev = evaluate(problem, np.full(21, 1e5), 0.05)
    S = assemble_source(ev.lam, problem.meas.lambda_m, ev.trace, problem.meas.t_m, ev.field, props, 0.01)
    g = gradient_q(solve_adjoint(props, ev.grid, S))
    assert np.max(np.abs(g)) < 1e-30


@pytest.mark.parametrize("alpha, trace_source", [(0.0, "uniform"), (1e-2, "boundary")])
def test_flux_gradient_matches_fd(props, alpha, trace_source):
    rng = np.random.default_rng(7)
    t = np.linspace(0, 500, 21)
    spec = SynthesisSpec(true_q=tuple(smooth_random_flux(rng, t, 1e5)), M=20, N=20)
    problem = InverseProblem(props, synthesize(spec, props), 26.0, 20)
    q = smooth_random_flux(rng, t, 8e4)
    _, _, err = flux_gradient_errors(problem, q, 0.048, alpha, trace_source)
    assert err.max() < 1e-3


# ---------------------------------------------------------------- thickness


def test_gradient_L_zero_residual(props, small_grid):
    f = uniform_field(small_grid)
    lam = time_of_flight(f, props)
    assert gradient_L(lam, lam, f, props) == 0.0


def test_gradient_L_constant_residual():
    props = MaterialProps(7800, 400, 50, -0.4521, 3259.9)
    g = make_grid(0.05, 500.0, 20, 500)
    f = uniform_field(g)
    val = gradient_L(np.full(501, 1e-9), np.zeros(501), f, props)
    assert val == pytest.approx(2 * 1e-9 * 500 / 3248.1454, rel=1e-12)
    assert val == pytest.approx(3.078679e-10, abs=1e-16)


def test_gradient_L_sign_for_thick_guess(props, small_grid):
    f = uniform_field(small_grid, 80.0)
    lam_m = time_of_flight(f, props).values
    assert gradient_L(1.01 * lam_m, lam_m, f, props) > 0.0


def test_gradient_L_domain_error(props, small_grid):
    T = np.full((21, 21), 26.0)
    T[-1, 4] = 1e4
    with pytest.raises(DomainError):
        gradient_L(np.zeros(21), np.zeros(21), TemperatureField(small_grid, T), props)


def test_thickness_formula_sign_agrees_with_fd(props):
    rng = np.random.default_rng(11)
    t = np.linspace(0, 500, 21)
    spec = SynthesisSpec(true_q=tuple(smooth_random_flux(rng, t, 1e5)), M=20, N=20)
    problem = InverseProblem(props, synthesize(spec, props), 26.0, 20)
    for _ in range(10):
        L = 0.05 * rng.uniform(0.5, 1.5)
        q = smooth_random_flux(rng, t, rng.uniform(0, 1.5e5))
        formula, fd = thickness_gradient_pair(problem, q, L)
        assert np.sign(formula) == np.sign(fd)


# ---------------------------------------------------------------- sensitivity


def test_sensitivity_zero_direction(props, small_grid):
    assert np.all(solve_sensitivity(props, small_grid, np.zeros(21)).values == 0.0)


def test_sensitivity_linearity(props, small_grid, rng):
    p = rng.standard_normal(21) * 1e4
    a = solve_sensitivity(props, small_grid, p).values
    b = solve_sensitivity(props, small_grid, FluxProfile(2 * p)).values
    np.testing.assert_allclose(b, 2 * a, rtol=1e-14, atol=1e-300)


def test_sensitivity_superposition(props, rng):
    g = make_grid(0.05, 500.0, 40, 100)
    q = rng.uniform(0, 1e5, 101)
    p = rng.standard_normal(101) * 1e4
    eps = 0.1
    diff = solve_heat(props, g, FluxProfile(q + eps * p), 26.0).values - solve_heat(props, g, FluxProfile(q), 26.0).values
    sens = solve_sensitivity(props, g, p).values
    assert np.max(np.abs(diff - eps * sens)) <= 1e-10 * np.max(np.abs(eps * sens))


def test_sensitivity_shape_checked(props, small_grid):
    with pytest.raises(ValidationError):
        solve_sensitivity(props, small_grid, np.zeros(3))


def test_delta_lambda_trivial_cases(props, small_grid, rng):
    base = uniform_field(small_grid)
    zero = TemperatureField(small_grid, np.zeros((21, 21)))
    assert np.all(delta_lambda(zero, base, props).values == 0.0)
    flat = MaterialProps(7800, 400, 50, 0.0, 3259.9)
    sens = TemperatureField(small_grid, rng.random((21, 21)))
    assert np.all(delta_lambda(sens, base, flat).values == 0.0)


def test_delta_lambda_taylor_slope(props):
    g = make_grid(0.05, 500.0, 40, 100)
    q = np.full(101, 1e5)
    p = 1e5 * np.sin(np.linspace(0, 3, 101))
    base = solve_heat(props, g, FluxProfile(q), 26.0)
    lam0 = time_of_flight(base, props).values
    lin = delta_lambda(solve_sensitivity(props, g, p), base, props).values
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    errs = [
        np.max(np.abs(time_of_flight(solve_heat(props, g, FluxProfile(q + e * p), 26.0), props).values - lam0 - e * lin))
        for e in eps
    ]
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


# ---------------------------------------------------------------- fd oracle


def test_fd_gradient_constant_coordinate():
    J = lambda q, L: float(q[0] ** 2) + L
    assert fd_gradient(J, np.array([1.0, 5.0]), 0.05, 1) == 0.0
    assert fd_gradient(J, np.array([1.0, 5.0]), 0.05, "L") == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        fd_gradient(J, np.array([1.0]), 0.05, 0, step=0.0)
