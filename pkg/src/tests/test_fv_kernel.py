import jax
import jax.numpy as jnp
import numpy as np
import pytest

from app.entropy_flux import rusanov_flux
from app.exceptions import NonFiniteStateError
from app.fv_kernel import (
    DIRICHLET,
    GHOST_WIDTH,
    LINEAR_WEIGHTS,
    PERIODIC,
    BoundarySpec,
    Grid,
    assert_finite,
    fill_ghosts,
    make_field,
    pad_with_ghosts,
    semidiscrete_rhs,
    step_field,
    tvdrk3_step,
    weno5_interfaces,
    weno5_reconstruct,
)
from tests.test_resources import dirichlet_grid, periodic_grid, periodic_grid_2d


def advection_flux(direction, u_minus, u_plus):
    return jax.vmap(lambda a, b: rusanov_flux(a, b, lambda u: u, lambda u: 1.0))(
        u_minus, u_plus
    )


def test_grid_geometry():
    """Spacing, storage order and cell centers."""
    grid = Grid(
        n=(10, 8), lower=(0.0, -1.0), upper=(1.0, 1.0), boundary=(PERIODIC,) * 2
    )
    assert grid.d == 2
    assert grid.shape == (8, 10)
    assert grid.dx == pytest.approx((0.1, 0.25))
    assert grid.axis(0) == 1
    assert grid.face_measure(0) == pytest.approx(0.25)
    x, y = grid.mesh()
    assert x.shape == y.shape == (8, 10)
    assert x[0, 0] == pytest.approx(0.05)
    assert y[0, 0] == pytest.approx(-0.875)


def test_grid_validation():
    """Too few cells and unknown boundaries are rejected."""
    with pytest.raises(ValueError, match="at least 7"):
        Grid(n=(6,), lower=(0.0,), upper=(1.0,), boundary=(PERIODIC,))
    with pytest.raises(ValueError, match="boundary"):
        Grid(n=(16,), lower=(0.0,), upper=(1.0,), boundary=("reflecting",))


def test_weno5_exact_for_constant_and_linear_data():
    """WENO5 reproduces constant and linear data."""
    c = jnp.array(2.5)
    assert float(weno5_reconstruct(c, c, c, c, c, 0.1)) == 2.5
    values = [1.0 + 0.3 * k for k in range(5)]
    result = weno5_reconstruct(*map(jnp.array, values), 0.1)
    assert float(result) == pytest.approx(values[2] + 0.15, abs=1e-14)


def test_periodic_ghosts_wrap_and_are_idempotent():
    """Periodic ghosts copy the opposite end."""
    values = jnp.arange(8.0)[:, None]
    spec = BoundarySpec(PERIODIC)
    padded = pad_with_ghosts(values, 0, spec)
    np.testing.assert_array_equal(padded[:GHOST_WIDTH, 0], [5.0, 6.0, 7.0])
    np.testing.assert_array_equal(padded[-GHOST_WIDTH:, 0], [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(fill_ghosts(padded, 0, spec), padded)


def test_dirichlet_ghosts_hold_frozen_states():
    """Dirichlet ghosts repeat the initial end states."""
    grid = dirichlet_grid(8)
    field = make_field(jnp.linspace(1.0, 2.0, 8)[:, None], grid)
    padded = pad_with_ghosts(field.values, 0, field.boundaries[0])
    np.testing.assert_array_equal(padded[:GHOST_WIDTH, 0], [1.0] * 3)
    np.testing.assert_array_equal(padded[-GHOST_WIDTH:, 0], [2.0] * 3)
    assert field.boundaries[0].kind == DIRICHLET


def test_interfaces_count():
    """n cells have n + 1 faces."""
    padded = pad_with_ghosts(jnp.ones((10, 2)), 0, BoundarySpec(PERIODIC))
    u_minus, u_plus = weno5_interfaces(padded, 0, 0.1)
    assert u_minus.shape == u_plus.shape == (11, 2)


def test_constant_state_has_zero_residual():
    """A uniform 1D state does not move."""
    field = make_field(jnp.full((16, 1), 0.7), periodic_grid())
    np.testing.assert_allclose(semidiscrete_rhs(field, advection_flux), 0.0, atol=1e-14)


def test_periodic_residual_conserves_total():
    """The periodic residual sums to zero."""
    grid = periodic_grid_2d(12)
    x, y = grid.mesh()
    values = jnp.asarray(np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))[..., None]
    rate = semidiscrete_rhs(make_field(values, grid), advection_flux)
    assert abs(float(jnp.sum(rate))) * grid.cell_volume <= 1e-13


def test_tvdrk3_linear_decay():
    """One step of z' = -z matches the RK3 polynomial."""
    result = tvdrk3_step(np.array([1.0]), lambda z: -z, 0.1)
    assert result[0] == pytest.approx(0.9048333333333334, abs=1e-14)


def test_tvdrk3_requires_positive_step():
    """The time step must be positive."""
    with pytest.raises(ValueError, match="positive"):
        tvdrk3_step(np.array([1.0]), lambda z: -z, 0.0)


def test_non_finite_state_is_located():
    """The first bad cell and its step are reported."""
    values = np.zeros((8, 1))
    values[5, 0] = np.nan
    with pytest.raises(NonFiniteStateError) as excinfo:
        assert_finite(values, step=4)
    assert excinfo.value.step == 4
    assert excinfo.value.index == (5, 0)
    assert excinfo.value.axis == 0


def test_step_field_advects_periodically():
    """Linear advection returns after one period."""
    grid = periodic_grid(32)
    x = grid.centers(0)
    field = make_field(jnp.asarray(np.sin(2 * np.pi * x))[:, None], grid)
    dt = 0.5 * grid.dx[0]
    for _ in range(64):
        field = step_field(field, advection_flux, dt)
    # one full period
    np.testing.assert_allclose(field.values[:, 0], np.sin(2 * np.pi * x), atol=2e-2)


def test_weno5_step_stays_bounded_and_upwind():
    """A step edge reconstructs inside [0, 1], far below the linear blend."""
    zero, one = jnp.array(0.0), jnp.array(1.0)
    left = float(weno5_reconstruct(zero, zero, zero, one, one, 0.1))
    linear_blend = LINEAR_WEIGHTS[1] / 3.0 + LINEAR_WEIGHTS[2] * 2.0 / 3.0
    assert 0.0 <= left <= 1.0
    assert left < 1e-3 < linear_blend

    right = float(weno5_reconstruct(one, one, one, zero, zero, 0.1))
    assert 1.0 - 1e-3 < right <= 1.0


def test_constant_state_is_steady_in_two_dimensions():
    """Every face flux cancels exactly for a uniform 2D state."""
    values = jnp.broadcast_to(jnp.array([0.7, -1.25]), (8, 8, 2))
    rate = semidiscrete_rhs(make_field(values, periodic_grid_2d()), advection_flux)
    np.testing.assert_array_equal(rate, 0.0)


def test_non_finite_axis_follows_the_blow_up():
    """The reported axis is the one along which the bad cells end."""
    row = np.ones((8, 8, 1))
    row[3, :, 0] = np.inf
    with pytest.raises(NonFiniteStateError) as excinfo:
        assert_finite(row, step=1)
    assert excinfo.value.index == (3, 0, 0)
    assert excinfo.value.axis == 0

    column = np.ones((8, 8, 1))
    column[:, 5, 0] = np.nan
    with pytest.raises(NonFiniteStateError) as excinfo:
        assert_finite(column, step=2)
    assert excinfo.value.index == (0, 5, 0)
    assert excinfo.value.axis == 1

    with pytest.raises(NonFiniteStateError) as excinfo:
        assert_finite(np.full((8, 8, 1), np.nan), step=3)
    assert excinfo.value.axis is None
