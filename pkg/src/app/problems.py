"""
Benchmark conservation laws: true fluxes, wave speeds, initial-condition families
with their sampling ranges, and the per-problem defaults used for data generation,
training and evaluation.
"""

import jax.numpy as jnp
import numpy as np
from pydantic import BaseModel, ConfigDict

from app.fv_kernel import DIRICHLET, PERIODIC, Grid
from app.symclaw_logger import logger

# 4-point Gauss-Legendre rule on [-1/2, 1/2] for cell averages
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * _GL_NODES
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

GAMMA = 1.4
SHU_OSHER_X1 = 3.29867


class ProblemSpec(BaseModel):
    """
    A benchmark law. Subclasses implement the flux, the wave speed and the
    point-wise initial condition; the defaults mirror the published setups.
    """

    model_config = ConfigDict(frozen=True)

    problem_id: str
    components: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    boundary: tuple[str, ...]
    n: tuple[int, ...]
    dt: float
    L: int = 20
    L_train: int = 20
    n_traj: int
    epochs: int
    batch_size: int
    tfinal: float
    snapshot_times: tuple[float, ...]
    fcnn_hidden: tuple[int, ...]
    icnn_hidden: tuple[int, ...]
    warmup_fraction: float = 0.1
    parameter_names: tuple[str, ...]
    parameter_bounds: tuple[tuple[float, float], ...]
    test_parameters: tuple[float, ...]
    g: float | None = None

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return len(self.lower)

    def flux(self, u, direction: int):
        raise NotImplementedError

    def max_speed(self, u, direction: int):
        """Local bound on the absolute eigenvalues of the flux Jacobian."""
        raise NotImplementedError

    def pointwise(self, params: np.ndarray, *coords: np.ndarray) -> np.ndarray:
        """Initial state at points, shape coords.shape + (p,)."""
        raise NotImplementedError

    def make_grid(self, n: tuple[int, ...] | None = None) -> Grid:
        return Grid(
            n=tuple(n) if n is not None else self.n,
            lower=self.lower,
            upper=self.upper,
            boundary=self.boundary,
        )

    def sample_parameters(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform(lo, hi) for lo, hi in self.parameter_bounds])

    def initial_condition(self, params, grid: Grid) -> np.ndarray:
        """
        Cell averages of the initial state by tensor Gauss-Legendre quadrature.

        Args:
            params: Parameter vector of the family.
            grid (Grid): Target grid.

        Returns:
            np.ndarray: Array of shape grid.shape + (p,).
        """
        params = np.asarray(params, dtype=np.float64)
        centers = grid.mesh()
        total = np.zeros(grid.shape + (self.p,))
        for offsets in np.ndindex(*(len(_GL_NODES),) * grid.d):
            weight = np.prod([_GL_WEIGHTS[k] for k in offsets])
            coords = [
                centers[i] + _GL_NODES[offsets[i]] * grid.dx[i] for i in range(grid.d)
            ]
            total += weight * self.pointwise(params, *coords)
        return total


class Burgers1D(ProblemSpec):
    problem_id: str = "burgers1d"
    components: tuple[str, ...] = ("u",)
    lower: tuple[float, ...] = (0.0,)
    upper: tuple[float, ...] = (2.0 * np.pi,)
    boundary: tuple[str, ...] = (PERIODIC,)
    n: tuple[int, ...] = (512,)
    dt: float = 0.005
    n_traj: int = 200
    epochs: int = 200
    batch_size: int = 5
    tfinal: float = 3.0
    snapshot_times: tuple[float, ...] = (1.0, 2.0, 3.0)
    fcnn_hidden: tuple[int, ...] = (32,)
    icnn_hidden: tuple[int, ...] = (32, 32)
    parameter_names: tuple[str, ...] = ("alpha", "beta")
    parameter_bounds: tuple[tuple[float, float], ...] = ((0.75, 1.25), (-0.25, 0.25))
    test_parameters: tuple[float, ...] = (1.05609, 0.1997)

    def flux(self, u, direction: int):
        return 0.5 * u**2

    def max_speed(self, u, direction: int):
        return jnp.abs(u[..., 0])

    def pointwise(self, params, x):
        alpha, beta = params
        return (alpha * np.sin(x) + beta)[..., None]


class ShallowWater(ProblemSpec):
    problem_id: str = "shallow_water"
    components: tuple[str, ...] = ("h", "hu")
    lower: tuple[float, ...] = (-5.0,)
    upper: tuple[float, ...] = (5.0,)
    boundary: tuple[str, ...] = (DIRICHLET,)
    n: tuple[int, ...] = (512,)
    dt: float = 0.005
    n_traj: int = 300
    epochs: int = 200
    batch_size: int = 10
    tfinal: float = 1.5
    snapshot_times: tuple[float, ...] = (0.5, 1.5)
    fcnn_hidden: tuple[int, ...] = (64, 64, 64)
    icnn_hidden: tuple[int, ...] = (64, 64)
    parameter_names: tuple[str, ...] = ("h_l", "h_r", "u_l", "u_r", "x0")
    parameter_bounds: tuple[tuple[float, float], ...] = (
        (3.3, 3.7),
        (0.8, 1.2),
        (-0.1, 0.1),
        (-0.1, 0.1),
        (-0.1, 0.1),
    )
    test_parameters: tuple[float, ...] = (
        3.5691196,
        1.178673,
        -0.064667,
        -0.045197,
        0.003832,
    )
    g: float | None = 1.0

    def flux(self, u, direction: int):
        h, hu = u[..., 0], u[..., 1]
        vel = hu / h
        return jnp.stack([hu, hu * vel + 0.5 * self.g * h**2], axis=-1)

    def max_speed(self, u, direction: int):
        h = u[..., 0]
        return jnp.abs(u[..., 1] / h) + jnp.sqrt(self.g * h)

    def pointwise(self, params, x):
        h_l, h_r, u_l, u_r, x0 = params
        left = x < x0
        h = np.where(left, h_l, h_r)
        vel = np.where(left, u_l, u_r)
        return np.stack([h, h * vel], axis=-1)


class Euler1D(ProblemSpec):
    problem_id: str = "euler"
    components: tuple[str, ...] = ("rho", "rho_u", "E")
    lower: tuple[float, ...] = (-5.0,)
    upper: tuple[float, ...] = (5.0,)
    boundary: tuple[str, ...] = (DIRICHLET,)
    n: tuple[int, ...] = (512,)
    dt: float = 0.002
    L: int = 300
    L_train: int = 20
    n_traj: int = 150
    epochs: int = 500
    batch_size: int = 5
    tfinal: float = 1.6
    snapshot_times: tuple[float, ...] = (1.6,)
    fcnn_hidden: tuple[int, ...] = (64, 64, 64)
    icnn_hidden: tuple[int, ...] = (64, 64)
    warmup_fraction: float = 0.05
    parameter_names: tuple[str, ...] = ("rho_l", "epsilon", "p_l", "p_r", "u_l", "x0")
    parameter_bounds: tuple[tuple[float, float], ...] = tuple(
        (min(0.9 * c, 1.1 * c), max(0.9 * c, 1.1 * c))
        for c in (3.857135, 0.2, 10.32333, 1.0, 2.62936, -4.0)
    )
    test_parameters: tuple[float, ...] = (3.857135, 0.2, 10.32333, 1.0, 2.62936, -4.0)

    @staticmethod
    def pressure(u):
        rho, mom, energy = u[..., 0], u[..., 1], u[..., 2]
        return (GAMMA - 1.0) * (energy - 0.5 * mom**2 / rho)

    def flux(self, u, direction: int):
        rho, mom, energy = u[..., 0], u[..., 1], u[..., 2]
        vel = mom / rho
        pressure = self.pressure(u)
        return jnp.stack(
            [mom, mom * vel + pressure, vel * (energy + pressure)], axis=-1
        )

    def max_speed(self, u, direction: int):
        rho = u[..., 0]
        sound = jnp.sqrt(GAMMA * jnp.abs(self.pressure(u)) / rho)
        return jnp.abs(u[..., 1] / rho) + sound

    def pointwise(self, params, x):
        rho_l, epsilon, p_l, p_r, u_l, x0 = params
        left = x <= x0
        wave = 1.0 + epsilon * np.sin(5.0 * x)
        tail = wave * np.exp(-((x - SHU_OSHER_X1) ** 4))
        rho = np.where(left, rho_l, np.where(x <= SHU_OSHER_X1, wave, tail))
        vel = np.where(left, u_l, 0.0)
        pressure = np.where(left, p_l, p_r)
        energy = pressure / (GAMMA - 1.0) + 0.5 * rho * vel**2
        return np.stack([rho, rho * vel, energy], axis=-1)


class Burgers2D(ProblemSpec):
    problem_id: str = "burgers2d"
    components: tuple[str, ...] = ("u",)
    lower: tuple[float, ...] = (0.0, 0.0)
    upper: tuple[float, ...] = (1.0, 1.0)
    boundary: tuple[str, ...] = (PERIODIC, PERIODIC)
    n: tuple[int, ...] = (100, 100)
    dt: float = 0.001
    n_traj: int = 10
    epochs: int = 500
    batch_size: int = 2
    tfinal: float = 1.6
    snapshot_times: tuple[float, ...] = (1.6,)
    fcnn_hidden: tuple[int, ...] = (32,)
    icnn_hidden: tuple[int, ...] = (32, 32)
    parameter_names: tuple[str, ...] = ("x0", "y0", "alpha", "beta")
    parameter_bounds: tuple[tuple[float, float], ...] = (
        (0.5, 1.5),
        (-0.5, 0.5),
        (0.75, 1.25),
        (-0.25, 0.25),
    )
    test_parameters: tuple[float, ...] = (1.032833, 0.034137, 1.004777, 0.106782)

    def flux(self, u, direction: int):
        return 0.5 * u**2

    def max_speed(self, u, direction: int):
        return jnp.abs(u[..., 0])

    def pointwise(self, params, x, y):
        x0, y0, alpha, beta = params
        value = (
            alpha * np.sin(2.0 * np.pi * x + x0) * np.cos(2.0 * np.pi * y + y0) + beta
        )
        return value[..., None]


class KPP(ProblemSpec):
    problem_id: str = "kpp"
    components: tuple[str, ...] = ("u",)
    lower: tuple[float, ...] = (-2.0, -2.0)
    upper: tuple[float, ...] = (2.0, 2.0)
    boundary: tuple[str, ...] = (DIRICHLET, DIRICHLET)
    n: tuple[int, ...] = (100, 100)
    dt: float = 0.001
    n_traj: int = 50
    epochs: int = 500
    batch_size: int = 2
    tfinal: float = 0.6
    snapshot_times: tuple[float, ...] = (0.6,)
    fcnn_hidden: tuple[int, ...] = (32,)
    icnn_hidden: tuple[int, ...] = (32, 32)
    parameter_names: tuple[str, ...] = ("x0", "y0", "omega_a", "omega_b", "omega_c")
    parameter_bounds: tuple[tuple[float, float], ...] = ((-0.25, 0.25),) * 5
    test_parameters: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0)

    def flux(self, u, direction: int):
        return jnp.cos(u) if direction == 0 else jnp.sin(u)

    def max_speed(self, u, direction: int):
        # |cos'|, |sin'| <= 1 everywhere; the flux is non-convex
        return jnp.ones_like(u[..., 0])

    def pointwise(self, params, x, y):
        x0, y0, omega_a, omega_b, omega_c = params
        c = 0.7 + omega_c
        a = 3.25 * np.pi + 2.0 * np.pi * omega_a
        b = (
            a
            + 1.0
            + np.cos(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)
            + np.pi
            * (1.0 + np.cos(4.0 * np.pi * x) * np.sin(6.0 * np.pi * y))
            * omega_b
        )
        r = np.sqrt((x - x0) ** 2 + (y - y0) ** 2)
        return np.where(r > c, b * np.exp(-(r**2) / c**2), b)[..., None]


PROBLEMS: dict[str, ProblemSpec] = {
    spec.problem_id: spec
    for spec in (Burgers1D(), ShallowWater(), Euler1D(), Burgers2D(), KPP())
}


def get_problem(problem_id: str, g: float | None = None) -> ProblemSpec:
    """
    Looks up a benchmark by id.

    Args:
        problem_id (str): One of ``PROBLEMS``.
        g (float | None): Gravity override for shallow water.

    Raises:
        ValueError: For an unknown id.
    """
    try:
        spec = PROBLEMS[problem_id]
    except KeyError as e:
        logger.error("Unknown problem id: %s", problem_id)
        raise ValueError(
            f"Unknown problem '{problem_id}', expected one of {sorted(PROBLEMS)}"
        ) from e
    if g is not None and spec.g is not None and g != spec.g:
        spec = spec.model_copy(update={"g": g})
    return spec


def sample_initial_condition(
    problem: ProblemSpec, rng: np.random.Generator, grid: Grid | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draws a parameter vector and returns (parameters, cell averages)."""
    grid = grid or problem.make_grid()
    params = problem.sample_parameters(rng)
    return params, problem.initial_condition(params, grid)
