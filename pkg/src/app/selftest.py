"""
Fast structural checks of the solver and learner, runnable without pytest
(``main.py selftest``). Each check returns a :class:`CheckResult`.
"""

import math
import time
from collections.abc import Callable
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree

from app.entropy_flux import (
    FluxSettings,
    clip_wave_speed,
    entropy_conservative_flux,
    model_flux_context,
    regularize_hessian,
    rusanov_flux,
    stabilized_jump_solve,
)
from app.fv_kernel import (
    PERIODIC,
    Grid,
    GridField,
    frozen_boundaries,
    step_field,
    tvdrk3_step,
)
from app.jacobi import power_iteration_radius, wave_speed
from app.metrics import conservation_remainder
from app.networks import (
    flux_jacobian_factors,
    flux_potential,
    init_model,
    physical_flux,
)
from app.problems import get_problem
from app.symclaw_logger import logger
from app.training import get_simulator, rollout


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


@jax.jit
def _identity_residuals(model, u_minus, u_plus):
    def single(um, up):
        ctx = model_flux_context(model, 0, um, up, 1.0, 1.0)
        f_star = entropy_conservative_flux(
            ctx,
            lambda u: physical_flux(model, u, 0),
            lambda u: flux_potential(model, u, 0),
        )
        jump_phi = flux_potential(model, up, 0) - flux_potential(model, um, 0)
        return jnp.abs(ctx.jump_v @ f_star - jump_phi), jnp.abs(jump_phi)

    return jax.vmap(single)(u_minus, u_plus)


def check_entropy_conservation(
    instances: int = 10_000, seed: int = 0, networks_per_dim: int = 4
) -> CheckResult:
    """[[v]]^T f* = [[phi]] for random networks and state pairs, p = 1, 2, 3."""
    rng = np.random.default_rng(seed)
    key = jax.random.PRNGKey(seed)
    per_network = math.ceil(instances / (3 * networks_per_dim))
    worst = 0.0
    for p in (1, 2, 3):
        for _ in range(networks_per_dim):
            key, sub = jax.random.split(key)
            model = init_model(sub, p, 1, [8], [8, 8])
            u_minus = rng.uniform(-1.0, 1.0, (per_network, p))
            u_plus = rng.uniform(-1.0, 1.0, (per_network, p))
            residual, scale = _identity_residuals(model, u_minus, u_plus)
            ratio = np.asarray(residual) / (1.0 + np.asarray(scale))
            worst = max(worst, float(ratio.max()))
    return CheckResult(
        "entropy-conservation identity",
        worst <= 1e-12,
        f"max residual / (1 + |[[phi]]|) = {worst:.3e}",
    )


@jax.jit
def _jacobian_factors(model, states):
    return jax.vmap(lambda u: flux_jacobian_factors(model, u, 0))(states)


def _reference_radius(a: np.ndarray, b: np.ndarray) -> float:
    squares = np.sort(np.abs(np.linalg.eigvals(a @ b)) ** 2)[::-1]
    distinct = squares[squares < squares[0] * (1.0 - 1e-9)]
    if distinct.size and distinct[0] > 0.9 * squares[0]:
        # power iteration would converge too slowly for this spectrum
        return float(np.sqrt(squares[0]))
    return power_iteration_radius(a, b, iterations=500)


def check_hyperbolicity(
    instances: int = 1000, seed: int = 0, networks_per_dim: int = 4
) -> CheckResult:
    """Entropy Hessian is PSD and the symmetric wave speed matches rho(A B)."""
    rng = np.random.default_rng(seed)
    key = jax.random.PRNGKey(seed + 1)
    per_network = math.ceil(instances / (3 * networks_per_dim))
    min_eig, worst_rel = math.inf, 0.0
    for p in (1, 2, 3):
        for _ in range(networks_per_dim):
            key, sub = jax.random.split(key)
            model = init_model(sub, p, 1, [8], [8, 8])
            states = rng.uniform(-1.0, 1.0, (per_network, p))
            a_all, b_all = (np.asarray(m) for m in _jacobian_factors(model, states))
            for a, b in zip(a_all, b_all, strict=True):
                min_eig = min(min_eig, float(np.linalg.eigvalsh(b).min()))
                speed = float(wave_speed(jnp.asarray(a), jnp.asarray(b)))
                reference = _reference_radius(a, b)
                rel = abs(speed - reference) / max(reference, 1e-300)
                worst_rel = max(worst_rel, rel)
    return CheckResult(
        "hyperbolicity by construction",
        min_eig >= -1e-10 and worst_rel <= 1e-6,
        f"min Hessian eigenvalue {min_eig:.3e}, "
        f"max wave-speed rel. err {worst_rel:.3e}",
    )


def check_structural_conservation(
    n: int = 128, steps: int = 200, seed: int = 0
) -> CheckResult:
    """An untrained model conserves the total exactly on a periodic grid."""
    problem = get_problem("burgers1d")
    grid = problem.make_grid((n,))
    ic = problem.initial_condition(problem.test_parameters, grid)
    model = init_model(jax.random.PRNGKey(seed), 1, 1, [8], [8, 8])
    trajectory = rollout(model, ic, steps, math.inf, grid, problem.dt)
    worst = float(conservation_remainder(trajectory, model, grid, problem.dt).max())
    return CheckResult(
        "structural conservation",
        worst <= 1e-12,
        f"max conservation remainder over {steps} steps = {worst:.3e}",
    )


def _advect(n: int, tfinal: float) -> float:
    grid = Grid(n=(n,), lower=(0.0,), upper=(1.0,), boundary=(PERIODIC,))
    dx = grid.dx[0]
    steps = math.ceil(tfinal / (0.2 * dx ** (5.0 / 3.0)))
    dt = tfinal / steps
    edges = np.arange(n + 1) * dx

    def averages(t):
        cos = np.cos(2.0 * np.pi * (edges - t))
        return ((cos[:-1] - cos[1:]) / (2.0 * np.pi * dx))[:, None]

    def interface_flux(direction, u_minus, u_plus):
        return jax.vmap(
            lambda um, up: rusanov_flux(um, up, lambda u: u, lambda u: 1.0)
        )(u_minus, u_plus)

    u0 = jnp.asarray(averages(0.0))
    field = GridField(u0, grid, frozen_boundaries(grid, u0))

    @jax.jit
    def solve(values):
        def body(v, _):
            return step_field(field.with_values(v), interface_flux, dt).values, None

        return jax.lax.scan(body, values, None, length=steps)[0]

    final = np.asarray(solve(u0))
    return float(np.abs(final - averages(tfinal)).sum() * dx)


def spatial_orders(sizes=(64, 128, 256), tfinal: float = 0.1) -> list[float]:
    """Observed orders of linear advection of a sine under refinement."""
    errors = [_advect(n, tfinal) for n in sizes]
    return [math.log2(errors[k] / errors[k + 1]) for k in range(len(errors) - 1)]


def temporal_order(steps=(10, 20, 40), tfinal: float = 1.0) -> float:
    """Observed order of TVDRK3 on z' = -z."""
    errors = []
    for count in steps:
        dt = tfinal / count
        z = np.array([1.0])
        for step in range(count):
            z = tvdrk3_step(z, lambda y: -y, dt, step)
        errors.append(abs(z[0] - math.exp(-tfinal)))
    return math.log2(errors[-2] / errors[-1])


def check_convergence_orders() -> CheckResult:
    """WENO5 spatial order >= 4.5 and TVDRK3 temporal order 3."""
    space = spatial_orders()
    time_order = temporal_order()
    return CheckResult(
        "WENO5/TVDRK3 orders",
        min(space) >= 4.5 and abs(time_order - 3.0) <= 0.1,
        f"spatial orders {[round(o, 3) for o in space]}, temporal {time_order:.3f}",
    )


def gradient_errors(seed: int = 0, h: float = 1e-6) -> np.ndarray:
    """
    Relative mismatch between the recurrent-loss gradient and central finite
    differences, one entry per parameter (16 cells, one step, 1x8 networks).
    """
    grid = Grid(n=(16,), lower=(0.0,), upper=(1.0,), boundary=(PERIODIC,))
    dt = 0.01
    settings = FluxSettings(wave_speed_gradient=True)
    x = grid.centers(0)
    rng = np.random.default_rng(seed)
    u0 = 0.5 + 0.3 * np.sin(2.0 * np.pi * x) + 0.05 * rng.standard_normal(x.shape)
    u1 = u0 + 0.01 * rng.standard_normal(x.shape)
    windows = jnp.asarray(np.stack([u0, u1])[None, :, :, None])

    model = init_model(jax.random.PRNGKey(seed), 1, 1, [8], [8])
    simulator = get_simulator(grid, dt, settings)
    shift = jnp.asarray(1.0)
    _, grads = simulator.loss_and_grad(model, windows, shift)
    flat, unravel = ravel_pytree(model)
    analytic = np.asarray(ravel_pytree(grads)[0])

    numeric = np.empty_like(analytic)
    for k in range(flat.size):
        step = np.zeros(flat.size)
        step[k] = h
        up = simulator.loss(unravel(flat + step), windows, shift)
        down = simulator.loss(unravel(flat - step), windows, shift)
        numeric[k] = (float(up) - float(down)) / (2.0 * h)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    # absolute floor at the finite-difference round-off level
    return np.abs(analytic - numeric) / np.maximum(scale, 1e-4)


def check_loss_gradient(seed: int = 0) -> CheckResult:
    """Loss gradient against central finite differences."""
    errors = gradient_errors(seed)
    worst = float(errors.max())
    return CheckResult(
        "loss gradient vs finite differences",
        worst <= 1e-5,
        f"max rel. err {worst:.3e} over {errors.size} parameters",
    )


def check_stabilizers() -> CheckResult:
    """Exact values of the Hessian shift, wave-speed clip and fallback."""
    failures = []
    b = jnp.array([[2.0, 0.5], [0.5, 1.0]])
    if not bool(jnp.all(regularize_hessian(b, 1) == b + jnp.eye(2))):
        failures.append("epoch-1 shift is not +I")
    if not bool(jnp.all(regularize_hessian(b, 3) == b + 0.01 * jnp.eye(2))):
        failures.append("epoch-3 shift is not +0.01 I")

    dx, dt = 0.05, 0.01
    if float(clip_wave_speed(100.0, dx, dt)) != dx / dt:
        failures.append("wave speed not clipped at dx/dt")
    if float(clip_wave_speed(1.0, dx, dt)) != 1.0:
        failures.append("small wave speed was clipped")

    eye = jnp.eye(2)
    jump_u = jnp.array([1.0, 0.5])
    at_bound = stabilized_jump_solve(eye, jnp.array([2.0, 0.0]), jump_u)
    if not bool(jnp.all(at_bound == jnp.array([2.0, 0.0]))):
        failures.append("fallback taken at the bound")
    above = stabilized_jump_solve(eye, jnp.array([2.0 + 1e-9, 0.0]), jump_u)
    if not bool(jnp.all(above == jump_u)):
        failures.append("fallback not taken above the bound")
    return CheckResult(
        "stabilizer behaviour",
        not failures,
        "; ".join(failures) or "shift, clip and fallback exact",
    )


CHECKS: list[Callable[[], CheckResult]] = [
    check_entropy_conservation,
    check_hyperbolicity,
    check_structural_conservation,
    check_convergence_orders,
    check_loss_gradient,
    check_stabilizers,
]


def run_selftest(checks: list[Callable[[], CheckResult]] | None = None) -> bool:
    """
    Runs every check and logs one line per result.

    Returns:
        bool: True if all checks passed.
    """
    passed = True
    for check in checks or CHECKS:
        started = time.perf_counter()
        try:
            result = check()
        except Exception as e:
            logger.error("%s raised %s: %s", check.__name__, type(e).__name__, e)
            passed = False
            continue
        seconds = time.perf_counter() - started
        log = logger.info if result.passed else logger.error
        log(
            "[%s] %s: %s (%.1fs)",
            "PASS" if result.passed else "FAIL",
            result.name,
            result.detail,
            seconds,
        )
        passed = passed and result.passed
    return passed
