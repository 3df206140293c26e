"""
Finite-volume machinery on uniform structured grids: ghost cells, WENO5
reconstruction, the conservative semi-discrete residual and TVD Runge-Kutta 3
stepping.

Cell arrays are stored with the slowest axis first: a 2D field has shape
(n_y, n_x, p), so spatial direction ``i`` (0 = x) lives on array axis ``d-1-i``.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from app.exceptions import NonFiniteStateError
from app.symclaw_logger import logger

GHOST_WIDTH = 3
PERIODIC = "periodic"
DIRICHLET = "dirichlet"

# WENO5 linear weights for the three candidate stencils
LINEAR_WEIGHTS = (0.1, 0.6, 0.3)

InterfaceFlux = Callable[[int, jax.Array, jax.Array], jax.Array]


@dataclass(frozen=True)
class Grid:
    """
    Uniform grid, direction order (x first).

    Attributes:
        n (tuple[int, ...]): Cells per direction.
        lower (tuple[float, ...]): Lower domain bound per direction.
        upper (tuple[float, ...]): Upper domain bound per direction.
        boundary (tuple[str, ...]): ``periodic`` or ``dirichlet`` per direction.
    """

    n: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    boundary: tuple[str, ...]
    dx: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(k) for k in self.n))
        if any(k < 2 * GHOST_WIDTH + 1 for k in self.n):
            raise ValueError(f"WENO5 needs at least 7 cells per axis, got {self.n}")
        if not all(kind in (PERIODIC, DIRICHLET) for kind in self.boundary):
            raise ValueError(f"Unknown boundary kind in {self.boundary}")
        dx = tuple(
            (hi - lo) / k
            for lo, hi, k in zip(self.lower, self.upper, self.n, strict=True)
        )
        object.__setattr__(self, "dx", dx)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def axis(self, direction: int) -> int:
        return self.d - 1 - direction

    def face_measure(self, direction: int) -> float:
        """Measure of a cell face normal to ``direction``."""
        return self.cell_volume / self.dx[direction]

    def centers(self, direction: int) -> np.ndarray:
        return self.lower[direction] + (np.arange(self.n[direction]) + 0.5) * self.dx[
            direction
        ]

    def mesh(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays in storage shape, x first."""
        grids = np.meshgrid(
            *[self.centers(i) for i in reversed(range(self.d))], indexing="ij"
        )
        return list(reversed(grids))


@jax.tree_util.register_pytree_node_class
class BoundarySpec:
    """
    Boundary treatment along one direction. Dirichlet sides hold a frozen cell
    slice (the field with that axis removed) copied into all ghost layers.
    """

    def __init__(self, kind: str, lower=None, upper=None):
        self.kind = kind
        self.lower = lower
        self.upper = upper

    def tree_flatten(self):
        return (self.lower, self.upper), self.kind

    @classmethod
    def tree_unflatten(cls, kind, children):
        return cls(kind, *children)

    def __repr__(self):
        return f"BoundarySpec({self.kind})"


@jax.tree_util.register_pytree_node_class
class GridField:
    def __init__(self, values, grid: Grid, boundaries: tuple[BoundarySpec, ...]):
        self.values = values
        self.grid = grid
        self.boundaries = boundaries

    def tree_flatten(self):
        return (self.values, self.boundaries), self.grid

    @classmethod
    def tree_unflatten(cls, grid, children):
        return cls(children[0], grid, children[1])

    def with_values(self, values) -> "GridField":
        return GridField(values, self.grid, self.boundaries)


def frozen_boundaries(grid: Grid, values: jax.Array) -> tuple[BoundarySpec, ...]:
    """Boundary specs freezing the first/last cell slices of ``values``."""
    specs = []
    for direction, kind in enumerate(grid.boundary):
        axis = grid.axis(direction)
        if kind == PERIODIC:
            specs.append(BoundarySpec(PERIODIC))
        else:
            n = values.shape[axis]
            specs.append(
                BoundarySpec(
                    DIRICHLET,
                    jnp.take(values, 0, axis=axis),
                    jnp.take(values, n - 1, axis=axis),
                )
            )
    return tuple(specs)


def make_field(values, grid: Grid) -> GridField:
    """Field with boundary states frozen from ``values``."""
    values = jnp.asarray(values, dtype=jnp.float64)
    return GridField(values, grid, frozen_boundaries(grid, values))


def _slice(values: jax.Array, axis: int, start: int, stop: int) -> jax.Array:
    return jax.lax.slice_in_dim(values, start, stop, axis=axis)


def fill_ghosts(padded: jax.Array, axis: int, spec: BoundarySpec) -> jax.Array:
    """
    Overwrites the 3 ghost layers on each side of ``axis``.

    Args:
        padded (jax.Array): Cells plus ghost layers along ``axis``.
        axis (int): Array axis to fill.
        spec (BoundarySpec): Periodic wrap-around or frozen Dirichlet states.

    Returns:
        jax.Array: The array with fresh ghost cells.
    """
    g = GHOST_WIDTH
    total = padded.shape[axis]
    interior = _slice(padded, axis, g, total - g)
    if spec.kind == PERIODIC:
        n = interior.shape[axis]
        low = _slice(interior, axis, n - g, n)
        high = _slice(interior, axis, 0, g)
    else:
        low = jnp.repeat(jnp.expand_dims(spec.lower, axis), g, axis=axis)
        high = jnp.repeat(jnp.expand_dims(spec.upper, axis), g, axis=axis)
    return jnp.concatenate([low, interior, high], axis=axis)


def pad_with_ghosts(values: jax.Array, axis: int, spec: BoundarySpec) -> jax.Array:
    """Pads ``axis`` with filled ghost layers."""
    widths = [(0, 0)] * values.ndim
    widths[axis] = (GHOST_WIDTH, GHOST_WIDTH)
    return fill_ghosts(jnp.pad(values, widths), axis, spec)


def weno5_reconstruct(a, b, c, d, e, dx: float):
    """
    Left-biased WENO5 value at the right face of the cell holding ``c``.

    Args:
        a, b, c, d, e: Values of cells j-2 .. j+2 (any matching shapes).
        dx (float): Cell width (the indicator offset is dx squared).

    Returns:
        The reconstructed value; equal to ``c`` exactly for constant data.
    """
    beta0 = 13.0 / 12.0 * (a - 2.0 * b + c) ** 2 + 0.25 * (a - 4.0 * b + 3.0 * c) ** 2
    beta1 = 13.0 / 12.0 * (b - 2.0 * c + d) ** 2 + 0.25 * (b - d) ** 2
    beta2 = 13.0 / 12.0 * (c - 2.0 * d + e) ** 2 + 0.25 * (3.0 * c - 4.0 * d + e) ** 2
    eps = dx**2
    alpha0 = LINEAR_WEIGHTS[0] / (eps + beta0) ** 2
    alpha1 = LINEAR_WEIGHTS[1] / (eps + beta1) ** 2
    alpha2 = LINEAR_WEIGHTS[2] / (eps + beta2) ** 2
    total = alpha0 + alpha1 + alpha2
    # candidate values written as offsets from c
    delta0 = (a - b) / 3.0 - 5.0 * (b - c) / 6.0
    delta1 = -(b - c) / 6.0 + (d - c) / 3.0
    delta2 = 2.0 * (d - c) / 3.0 - (e - d) / 6.0
    return c + (alpha0 * delta0 + alpha1 * delta1 + alpha2 * delta2) / total


def weno5_interfaces(padded: jax.Array, axis: int, dx: float):
    """
    Interface states at the n+1 faces of a ghost-padded array.

    Returns:
        tuple: (u_minus, u_plus), each with n+1 entries along ``axis``; face m
        separates cells m-1 and m.
    """
    n = padded.shape[axis] - 2 * GHOST_WIDTH
    shifted = [_slice(padded, axis, k, k + n + 1) for k in range(6)]
    u_minus = weno5_reconstruct(*shifted[0:5], dx)
    u_plus = weno5_reconstruct(*shifted[5:0:-1], dx)
    return u_minus, u_plus


def _apply_flux(
    interface_flux: Callable, direction: int, u_minus: jax.Array, u_plus: jax.Array
) -> jax.Array:
    p = u_minus.shape[-1]
    shape = u_minus.shape
    fluxes = interface_flux(
        direction, u_minus.reshape(-1, p), u_plus.reshape(-1, p)
    )
    return fluxes.reshape(shape)


def interface_fluxes(field: GridField, interface_flux: InterfaceFlux) -> list:
    """Numerical fluxes at every face, one array per direction."""
    out = []
    for direction in range(field.grid.d):
        axis = field.grid.axis(direction)
        padded = pad_with_ghosts(field.values, axis, field.boundaries[direction])
        u_minus, u_plus = weno5_interfaces(padded, axis, field.grid.dx[direction])
        out.append(_apply_flux(interface_flux, direction, u_minus, u_plus))
    return out


def semidiscrete_rhs(field: GridField, interface_flux: InterfaceFlux) -> jax.Array:
    """
    Conservative residual -sum_i (F_{i+1/2} - F_{i-1/2}) / dx_i.

    Args:
        field (GridField): Current cell averages with boundary specs.
        interface_flux (InterfaceFlux): (direction, u_minus, u_plus) -> flux,
            with states flattened to shape (m, p).

    Returns:
        jax.Array: Time derivative of the cell averages.
    """
    rate = jnp.zeros_like(field.values)
    for direction, fluxes in enumerate(interface_fluxes(field, interface_flux)):
        axis = field.grid.axis(direction)
        n = field.grid.n[direction]
        difference = _slice(fluxes, axis, 1, n + 1) - _slice(fluxes, axis, 0, n)
        rate = rate - difference / field.grid.dx[direction]
    return rate


def _blow_up_axis(bad: np.ndarray, index: tuple) -> int | None:
    """
    Storage axis along which the bad cell has a finite neighbour (x first),
    or None when every neighbour is also non-finite.
    """
    for axis in reversed(range(bad.ndim - 1)):
        for offset in (-1, 1):
            neighbour = list(index)
            neighbour[axis] = (index[axis] + offset) % bad.shape[axis]
            if not bad[tuple(neighbour)]:
                return axis
    return None


def assert_finite(values, step: int) -> None:
    """
    Raises ``NonFiniteStateError`` naming the first non-finite cell. No-op while
    tracing.
    """
    if isinstance(values, jax.core.Tracer):
        return
    array = np.asarray(values)
    bad = ~np.isfinite(array)
    if bad.any():
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        axis = _blow_up_axis(bad, index)
        logger.error("Non-finite state at step %d, index %s", step, index)
        raise NonFiniteStateError(step=step, index=index, axis=axis)


def tvdrk3_step(z, rhs: Callable, dt: float, step: int = 0):
    """
    One strong-stability-preserving RK3 step.

    Args:
        z: State array.
        rhs (Callable): State -> time derivative.
        dt (float): Time step, positive.
        step (int): Step index reported if a stage goes non-finite (eager use).

    Returns:
        The updated state.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    z1 = z + dt * rhs(z)
    assert_finite(z1, step)
    z2 = 0.75 * z + 0.25 * z1 + 0.25 * dt * rhs(z1)
    assert_finite(z2, step)
    z3 = z / 3.0 + 2.0 / 3.0 * z2 + 2.0 / 3.0 * dt * rhs(z2)
    assert_finite(z3, step)
    return z3


def step_field(field: GridField, interface_flux: InterfaceFlux, dt: float) -> GridField:
    """Advances a field by one TVDRK3 step, boundary specs unchanged."""
    values = tvdrk3_step(
        field.values,
        lambda v: semidiscrete_rhs(field.with_values(v), interface_flux),
        dt,
    )
    return field.with_values(values)
