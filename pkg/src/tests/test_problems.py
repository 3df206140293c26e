import jax.numpy as jnp
import numpy as np
import pytest

from app.problems import PROBLEMS, get_problem, sample_initial_condition


def test_known_problems():
    """Every problem has matching test parameters and snapshot times."""
    assert set(PROBLEMS) == {"burgers1d", "shallow_water", "euler", "burgers2d", "kpp"}
    for problem in PROBLEMS.values():
        assert len(problem.test_parameters) == len(problem.parameter_bounds)
        assert all(t <= problem.tfinal for t in problem.snapshot_times)


def test_unknown_problem():
    """Unknown problem ids are rejected."""
    with pytest.raises(ValueError, match="Unknown problem"):
        get_problem("maxwell")


def test_gravity_override():
    """Gravity can be overridden for shallow water."""
    problem = get_problem("shallow_water", g=9.81)
    assert problem.g == 9.81
    assert get_problem("shallow_water").g == 1.0
    flux = problem.flux(jnp.array([2.0, 1.0]), 0)
    np.testing.assert_allclose(flux, [1.0, 0.5 + 0.5 * 9.81 * 4.0])


def test_burgers_cell_averages_are_exact():
    """Quadrature cell averages of the sine family are exact."""
    problem = get_problem("burgers1d")
    grid = problem.make_grid((64,))
    alpha, beta = problem.test_parameters
    ic = problem.initial_condition(problem.test_parameters, grid)
    edges = np.linspace(0.0, 2.0 * np.pi, 65)
    exact = alpha * (np.cos(edges[:-1]) - np.cos(edges[1:])) / grid.dx[0] + beta
    assert ic.shape == (64, 1)
    np.testing.assert_allclose(ic[:, 0], exact, atol=1e-12)


def test_euler_flux_and_speed():
    """Euler flux and fastest wave speed at a sample state."""
    problem = get_problem("euler")
    rho, vel, pressure = 1.0, 2.0, 0.4
    energy = pressure / 0.4 + 0.5 * rho * vel**2
    u = jnp.array([rho, rho * vel, energy])
    np.testing.assert_allclose(
        problem.flux(u, 0), [2.0, 4.0 + pressure, vel * (energy + pressure)]
    )
    expected_speed = abs(vel) + np.sqrt(1.4 * pressure / rho)
    assert float(problem.max_speed(u, 0)) == pytest.approx(expected_speed)


def test_two_dimensional_initial_conditions():
    """2D families fill the grid in (y, x) order."""
    for problem_id in ("burgers2d", "kpp"):
        problem = get_problem(problem_id)
        grid = problem.make_grid((10, 12))
        ic = problem.initial_condition(problem.test_parameters, grid)
        assert ic.shape == (12, 10, 1)
        assert np.all(np.isfinite(ic))


def test_sampled_parameters_respect_bounds():
    """Sampled parameters stay in their bounds."""
    rng = np.random.default_rng(0)
    for problem in PROBLEMS.values():
        grid = problem.make_grid(tuple(max(7, k // 16) for k in problem.n))
        params, ic = sample_initial_condition(problem, rng, grid)
        for value, (lo, hi) in zip(params, problem.parameter_bounds, strict=True):
            assert lo <= value <= hi
        assert ic.shape == grid.shape + (problem.p,)
