"""
Post-hoc evaluation of a learned law: conservation and entropy remainders,
relative L1 error against the reference solver, and solution snapshots.
"""

import math
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np
import xarray as xr

from app.checkpoint import load_checkpoint
from app.data_models import ReportMetadata
from app.exceptions import GridMismatchError
from app.fv_kernel import PERIODIC, Grid
from app.networks import (
    SymClawModel,
    entropy_flux,
    entropy_variables,
    icnn_eval,
    physical_flux,
)
from app.problems import get_problem
from app.reference_solver import reference_solve
from app.symclaw_logger import logger
from app.training import rollout


def _step_quantities(model: SymClawModel, grid: Grid, values: jax.Array):
    p = values.shape[-1]
    cells = values.reshape(-1, p)
    eta = jax.vmap(lambda u: icnn_eval(model.entropy, u))(cells)
    flux_power = jnp.zeros(())
    inflow = jnp.zeros(p)
    entropy_inflow = jnp.zeros(())
    for direction in range(grid.d):
        flux = jax.vmap(partial(physical_flux, model, direction=direction))
        flux_power += jnp.sum(
            jax.vmap(lambda u: entropy_variables(model.entropy, u))(cells)
            * flux(cells)
        )
        if grid.boundary[direction] == PERIODIC:
            continue
        axis = grid.axis(direction)
        n = grid.n[direction]
        lower = jnp.take(values, 0, axis=axis).reshape(-1, p)
        upper = jnp.take(values, n - 1, axis=axis).reshape(-1, p)
        g = jax.vmap(partial(entropy_flux, model, direction=direction))
        face = grid.face_measure(direction)
        inflow += (jnp.sum(flux(lower), axis=0) - jnp.sum(flux(upper), axis=0)) * face
        entropy_inflow += (jnp.sum(g(lower)) - jnp.sum(g(upper))) * face
    return eta, flux_power, inflow, entropy_inflow


@partial(jax.jit, static_argnums=(1,))
def _trajectory_quantities(model, grid, trajectory):
    return jax.lax.map(partial(_step_quantities, model, grid), trajectory)


def _cumulative(series: np.ndarray, dt: float) -> np.ndarray:
    """Right-endpoint sums over steps 1..l, zero at l=0."""
    out = np.zeros_like(series)
    out[1:] = np.cumsum(series[1:], axis=0) * dt
    return out


def _quantities(model, trajectory, grid):
    eta, flux_power, inflow, entropy_inflow = _trajectory_quantities(
        model, grid, jnp.asarray(trajectory, dtype=jnp.float64)
    )
    return (
        np.asarray(eta),
        np.asarray(flux_power),
        np.asarray(inflow),
        np.asarray(entropy_inflow),
    )


def conservation_remainder(
    trajectory: np.ndarray, model: SymClawModel, grid: Grid, dt: float
) -> np.ndarray:
    """
    |sum_j (u_j(t_l) - u_j(t_0)) dV - sum_s (F_a - F_b) dt| per component.

    Boundary fluxes use the learned flux at the boundary cells at the end of each
    step; periodic directions contribute nothing.

    Args:
        trajectory (np.ndarray): Predicted states, (T+1,) + grid.shape + (p,).
        model (SymClawModel): Learned law.
        grid (Grid): Grid of the trajectory.
        dt (float): Time step.

    Returns:
        np.ndarray: Remainder, shape (T+1, p).
    """
    trajectory = np.asarray(trajectory)
    p = trajectory.shape[-1]
    drift = (trajectory - trajectory[0]).reshape(len(trajectory), -1, p).sum(axis=1)
    drift *= grid.cell_volume
    _, _, inflow, _ = _quantities(model, trajectory, grid)
    return np.abs(drift - _cumulative(inflow, dt))


def entropy_remainder(
    trajectory: np.ndarray, model: SymClawModel, grid: Grid, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Discrete entropy remainder in two forms.

    The literal form subtracts sum_s sum_j v_j^T f(u_j(t_s)) dt from the total
    entropy change; the boundary form subtracts the net entropy flux
    G = v^T f - phi through the domain boundary instead.

    Returns:
        tuple[np.ndarray, np.ndarray]: (literal, boundary), each of shape (T+1,).
    """
    trajectory = np.asarray(trajectory)
    eta, flux_power, _, entropy_inflow = _quantities(model, trajectory, grid)
    change = (eta - eta[0]).sum(axis=1) * grid.cell_volume
    literal = change - _cumulative(flux_power, dt)
    boundary = change - _cumulative(entropy_inflow, dt)
    return literal, boundary


def relative_l1_error(pred: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """
    ||pred - ref||_1 / ||ref||_1 for every stored time (leading axis).

    Raises:
        GridMismatchError: If the shapes differ.
    """
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        logger.error("Cannot compare shapes %s and %s", pred.shape, ref.shape)
        raise GridMismatchError(pred.shape, ref.shape)
    axes = tuple(range(1, pred.ndim))
    return np.abs(pred - ref).sum(axis=axes) / np.abs(ref).sum(axis=axes)


class EvalReport:
    """
    Metric time series plus solution snapshots of one evaluation run.

    Args:
        times (np.ndarray): Strictly increasing time stamps.
        components (list[str]): Conserved-variable names.
        conservation (np.ndarray): (T, p) conservation remainders.
        entropy (np.ndarray): Literal entropy remainder (T,).
        entropy_boundary (np.ndarray): Boundary-flux entropy remainder (T,).
        error (np.ndarray): Relative L1 error vs. reference (T,).
        metadata (ReportMetadata): Provenance.
        grid (Grid): Grid of the snapshots.
        profiles (dict | None): time -> predicted state.
        reference_profiles (dict | None): time -> reference state.
    """

    def __init__(
        self,
        times,
        components: list[str],
        conservation,
        entropy,
        entropy_boundary,
        error,
        metadata: ReportMetadata,
        grid: Grid,
        profiles: dict | None = None,
        reference_profiles: dict | None = None,
    ):
        times = np.asarray(times, dtype=np.float64)
        if np.any(np.diff(times) <= 0):
            raise ValueError("Report time stamps must be strictly increasing")
        self.metadata = metadata
        self.grid = grid
        self.profiles = profiles or {}
        self.reference_profiles = reference_profiles or {}
        self.data = xr.Dataset(
            {
                "conservation": (("t", "component"), np.asarray(conservation)),
                "entropy": ("t", np.asarray(entropy)),
                "entropy_boundary": ("t", np.asarray(entropy_boundary)),
                "error": ("t", np.asarray(error)),
            },
            coords={"t": times, "component": list(components)},
        )

    @property
    def times(self) -> np.ndarray:
        return self.data["t"].values

    @property
    def components(self) -> list[str]:
        return [str(c) for c in self.data["component"].values]


def _snapshot_index(t: float, dt: float, steps: int) -> int | None:
    index = int(round(t / dt))
    if index < 0 or index > steps or not math.isclose(index * dt, t, abs_tol=1e-9):
        return None
    return index


def evaluate(
    checkpoint: str,
    problem_id: str,
    tfinal: float,
    times: list[float] | None = None,
) -> EvalReport:
    """
    Rolls a trained model out from the problem's test initial condition and
    compares it with the reference solver on the training grid.

    Args:
        checkpoint (str): Checkpoint path (stem, .json or .f64).
        problem_id (str): Benchmark id; must match the checkpoint.
        tfinal (float): Final time.
        times (list[float] | None): Snapshot times; problem defaults if None.

    Returns:
        EvalReport: Metrics and snapshots.
    """
    model, meta = load_checkpoint(checkpoint)
    if meta.problem != problem_id:
        logger.error("Checkpoint is for %s, not %s", meta.problem, problem_id)
        raise ValueError(
            f"Checkpoint was trained on '{meta.problem}', not '{problem_id}'"
        )
    problem = get_problem(problem_id, g=meta.g)
    grid = problem.make_grid(tuple(meta.n))
    dt = meta.dt
    steps = int(round(tfinal / dt))
    ic = problem.initial_condition(problem.test_parameters, grid)

    logger.info("Evaluating %s for %d steps (t=%g)", checkpoint, steps, tfinal)
    reference = reference_solve(problem, ic, dt, steps, grid)
    prediction = rollout(model, ic, steps, math.inf, grid, dt, meta.flux_settings())

    conservation = conservation_remainder(prediction, model, grid, dt)
    literal, boundary = entropy_remainder(prediction, model, grid, dt)
    error = relative_l1_error(prediction, reference)

    requested = problem.snapshot_times if times is None else times
    profiles, reference_profiles = {}, {}
    for t in requested:
        index = _snapshot_index(float(t), dt, steps)
        if index is None:
            logger.warning("Skipping snapshot t=%g outside [0, %g]", t, tfinal)
            continue
        profiles[float(t)] = prediction[index]
        reference_profiles[float(t)] = reference[index]

    metadata = ReportMetadata(
        problem=problem_id,
        checkpoint_id=meta.id,
        xi=meta.xi,
        tfinal=tfinal,
        dt=dt,
        n=list(meta.n),
        components=list(problem.components),
        snapshot_times=sorted(profiles),
    )
    return EvalReport(
        times=np.arange(steps + 1) * dt,
        components=list(problem.components),
        conservation=conservation,
        entropy=literal,
        entropy_boundary=boundary,
        error=error,
        metadata=metadata,
        grid=grid,
        profiles=profiles,
        reference_profiles=reference_profiles,
    )
