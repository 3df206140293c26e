"""
Ground-truth trajectories from the true flux: WENO5 + Rusanov + TVDRK3.
"""

from functools import partial

import jax
import jax.numpy as jnp
import numpy as np

from app.entropy_flux import rusanov_flux
from app.exceptions import CFLViolationError
from app.fv_kernel import PERIODIC, Grid, GridField, frozen_boundaries, step_field
from app.problems import ProblemSpec
from app.symclaw_logger import logger

CFL_LIMIT = 1.0


def known_flux(problem: ProblemSpec):
    """Interface flux callback for a law whose flux is known."""

    def interface_flux(direction, u_minus, u_plus):
        single = partial(
            rusanov_flux,
            flux_fn=lambda u: problem.flux(u, direction),
            speed_fn=lambda u: problem.max_speed(u, direction),
        )
        return jax.vmap(single)(u_minus, u_plus)

    return interface_flux


def cfl_number(problem: ProblemSpec, values: jax.Array, grid: Grid, dt: float):
    """dt * sum_i max|lambda_i| / dx_i over the field."""
    return sum(
        dt * jnp.max(problem.max_speed(values, i)) / grid.dx[i] for i in range(grid.d)
    )


@partial(jax.jit, static_argnums=(0, 2, 3, 4))
def _solve(problem, ic, grid, dt, steps):
    field = GridField(ic, grid, frozen_boundaries(grid, ic))
    interface_flux = known_flux(problem)

    def body(values, _):
        cfl = cfl_number(problem, values, grid, dt)
        new = step_field(field.with_values(values), interface_flux, dt).values
        return new, (new, cfl)

    _, (states, cfls) = jax.lax.scan(body, ic, None, length=steps)
    return jnp.concatenate([ic[None], states]), cfls


def reference_solve(
    problem: ProblemSpec, ic, dt: float, steps: int, grid: Grid | None = None
) -> np.ndarray:
    """
    Solves the true law from a cell-average initial state.

    Args:
        problem (ProblemSpec): The law.
        ic: Initial cell averages, shape grid.shape + (p,).
        dt (float): Fixed time step.
        steps (int): Number of steps.
        grid (Grid | None): Grid of ``ic``; the problem grid sized to ``ic``
            when omitted.

    Returns:
        np.ndarray: Trajectory of shape (steps+1,) + ic.shape.

    Raises:
        CFLViolationError: Naming the first step whose CFL number exceeds 1.
    """
    ic = jnp.asarray(ic, dtype=jnp.float64)
    grid = grid or problem.make_grid(tuple(reversed(ic.shape[:-1])))
    if steps == 0:
        return np.asarray(ic)[None]
    trajectory, cfls = _solve(problem, ic, grid, float(dt), int(steps))
    cfls = np.asarray(cfls)
    bad = np.flatnonzero(~(cfls <= CFL_LIMIT))
    if bad.size:
        step = int(bad[0])
        logger.error("Reference solve violates CFL at step %d (%s)", step, cfls[step])
        raise CFLViolationError(step=step, cfl=float(cfls[step]), limit=CFL_LIMIT)
    logger.debug(
        "Reference solve of %s: %d steps, max CFL %.3f",
        problem.problem_id,
        steps,
        cfls.max(),
    )
    return np.asarray(trajectory)


def total_variation(trajectory, grid: Grid) -> np.ndarray:
    """
    Total variation of every snapshot, per component.

    Jumps are weighted by the face measure and wrap around periodic axes.

    Args:
        trajectory: Snapshots of shape (T,) + grid.shape + (p,).
        grid (Grid): Grid of the snapshots.

    Returns:
        np.ndarray: Shape (T, p).
    """
    states = np.asarray(trajectory)
    tv = np.zeros((states.shape[0], states.shape[-1]))
    for direction in range(grid.d):
        axis = grid.axis(direction) + 1
        shifted = np.roll(states, -1, axis=axis)
        jumps = np.abs(shifted - states)
        if grid.boundary[direction] != PERIODIC:
            jumps = np.delete(jumps, -1, axis=axis)
        spatial = tuple(range(1, states.ndim - 1))
        tv += grid.face_measure(direction) * jumps.sum(axis=spatial)
    return tv
