"""
Interface fluxes: the entropy-conservative two-point flux, its entropy-stable
Rusanov-type extension with the training stabilizers, and the classical Rusanov
flux used when the true flux is known.
"""

import math
from collections.abc import Callable
from typing import NamedTuple

import jax
import jax.numpy as jnp

from app.jacobi import wave_speed
from app.networks import (
    SymClawModel,
    entropy_hessian,
    entropy_variables,
    flux_potential,
    physical_flux,
    potential_hessian,
)

JUMP_EPSILON = 1e-12


class FluxSettings(NamedTuple):
    """Stabilizer constants (hashable, closed over by compiled kernels)."""

    c1: float = 0.1
    c_d: float = 2.0
    c_cfl: float = 1.0
    wave_speed_gradient: bool = False


class FluxContext(NamedTuple):
    u_minus: jax.Array
    u_plus: jax.Array
    v_minus: jax.Array
    v_plus: jax.Array
    u_bar: jax.Array
    v_bar: jax.Array
    jump_u: jax.Array
    jump_v: jax.Array
    lambda_max: jax.Array
    entropy_hessian: jax.Array
    hessian_shift: jax.Array
    dx: float
    dt: float
    c_d: float = 2.0
    c_cfl: float = 1.0


def regularization_shift(epoch: float, c1: float = 0.1) -> float:
    """
    Diagonal Hessian shift C1^(epoch-1); zero for ``epoch=inf`` (evaluation).

    Raises:
        ValueError: If ``epoch < 1``.
    """
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    if math.isinf(epoch):
        return 0.0
    try:
        return 1.0 / (1.0 / c1) ** (epoch - 1)
    except OverflowError:
        # below the smallest subnormal
        return 0.0


def shift_hessian(b: jax.Array, shift) -> jax.Array:
    """B + shift * I."""
    return b + shift * jnp.eye(b.shape[0], dtype=b.dtype)


def regularize_hessian(b: jax.Array, epoch: float, c1: float = 0.1) -> jax.Array:
    """Entropy Hessian shifted for the given training epoch."""
    return shift_hessian(b, regularization_shift(epoch, c1))


def stabilized_jump_solve(
    b_reg: jax.Array, jump_v: jax.Array, jump_u: jax.Array, c_d: float = 2.0
) -> jax.Array:
    """
    Solves B_reg w = [[v]], falling back to [[u]] when the solution is larger
    than ``c_d`` times the state jump (max norm) or not finite.
    """
    w = jnp.linalg.solve(b_reg, jump_v)
    bound = c_d * jnp.max(jnp.abs(jump_u))
    keep = jnp.all(jnp.isfinite(w)) & (jnp.max(jnp.abs(w)) <= bound)
    return jnp.where(keep, w, jump_u)


def clip_wave_speed(lam, dx: float, dt: float, c_cfl: float = 1.0):
    """Caps the wave speed at c_cfl * dx / dt."""
    return jnp.minimum(lam, c_cfl * dx / dt)


def flux_context(
    u_minus: jax.Array,
    u_plus: jax.Array,
    gradient_fn: Callable,
    entropy_hessian_fn: Callable,
    potential_hessian_fn: Callable,
    dx: float,
    dt: float,
    hessian_shift=0.0,
    settings: FluxSettings = FluxSettings(),
) -> FluxContext:
    """
    Gathers everything an interface flux needs.

    Args:
        u_minus (jax.Array): Left reconstructed state (p,).
        u_plus (jax.Array): Right reconstructed state (p,).
        gradient_fn (Callable): u -> entropy variables.
        entropy_hessian_fn (Callable): u -> entropy Hessian.
        potential_hessian_fn (Callable): v -> potential Hessian.
        dx (float): Cell width in the flux direction.
        dt (float): Time step.
        hessian_shift: Epoch-dependent diagonal Hessian shift.
        settings (FluxSettings): Stabilizer constants.

    Returns:
        FluxContext: The interface bundle with the unclipped wave speed.
    """
    v_minus = gradient_fn(u_minus)
    v_plus = gradient_fn(u_plus)
    u_bar = 0.5 * (u_minus + u_plus)
    v_bar = 0.5 * (v_minus + v_plus)
    b = entropy_hessian_fn(u_bar)
    a = potential_hessian_fn(v_bar)
    if not settings.wave_speed_gradient:
        a, b_speed = jax.lax.stop_gradient(a), jax.lax.stop_gradient(b)
    else:
        b_speed = b
    return FluxContext(
        u_minus=u_minus,
        u_plus=u_plus,
        v_minus=v_minus,
        v_plus=v_plus,
        u_bar=u_bar,
        v_bar=v_bar,
        jump_u=u_plus - u_minus,
        jump_v=v_plus - v_minus,
        lambda_max=wave_speed(a, b_speed),
        entropy_hessian=b,
        hessian_shift=jnp.asarray(hessian_shift, dtype=u_bar.dtype),
        dx=dx,
        dt=dt,
        c_d=settings.c_d,
        c_cfl=settings.c_cfl,
    )


def entropy_conservative_flux(
    ctx: FluxContext, flux_fn: Callable, potential_fn: Callable
) -> jax.Array:
    """
    Two-point flux f* with [[v]]^T f* = [[phi]].

    Degenerate jumps (squared norm at most 1e-12 (1 + |v_bar|^2)) return the mean
    of the one-sided fluxes.

    Args:
        ctx (FluxContext): Interface bundle.
        flux_fn (Callable): u -> physical flux (p,).
        potential_fn (Callable): u -> scalar flux potential at v(u).

    Returns:
        jax.Array: Interface flux (p,).
    """
    f_mean = 0.5 * (flux_fn(ctx.u_plus) + flux_fn(ctx.u_minus))
    jump_phi = potential_fn(ctx.u_plus) - potential_fn(ctx.u_minus)
    jump_sq = ctx.jump_v @ ctx.jump_v
    regular = jump_sq > JUMP_EPSILON * (1.0 + ctx.v_bar @ ctx.v_bar)
    denominator = jnp.where(regular, jump_sq, 1.0)
    correction = jnp.where(
        regular, (jump_phi - ctx.jump_v @ f_mean) / denominator, 0.0
    )
    return f_mean + correction * ctx.jump_v


def dissipation(ctx: FluxContext) -> jax.Array:
    """lambda~ w with the stabilizers applied in order: shift, clamp, clip."""
    b_reg = shift_hessian(ctx.entropy_hessian, ctx.hessian_shift)
    w = stabilized_jump_solve(b_reg, ctx.jump_v, ctx.jump_u, ctx.c_d)
    return clip_wave_speed(ctx.lambda_max, ctx.dx, ctx.dt, ctx.c_cfl) * w


def entropy_stable_flux(
    ctx: FluxContext, flux_fn: Callable, potential_fn: Callable
) -> jax.Array:
    """Entropy-conservative flux minus half the Rusanov-type dissipation."""
    return entropy_conservative_flux(ctx, flux_fn, potential_fn) - 0.5 * dissipation(
        ctx
    )


def rusanov_flux(
    u_minus: jax.Array, u_plus: jax.Array, flux_fn: Callable, speed_fn: Callable
) -> jax.Array:
    """Local Lax-Friedrichs flux for a known physical flux and wave speed."""
    speed = jnp.maximum(speed_fn(u_minus), speed_fn(u_plus))
    return 0.5 * (flux_fn(u_minus) + flux_fn(u_plus)) - 0.5 * speed * (
        u_plus - u_minus
    )


def model_flux_context(
    model: SymClawModel,
    direction: int,
    u_minus: jax.Array,
    u_plus: jax.Array,
    dx: float,
    dt: float,
    hessian_shift=0.0,
    settings: FluxSettings = FluxSettings(),
) -> FluxContext:
    """Flux context of a model in one direction."""
    return flux_context(
        u_minus,
        u_plus,
        lambda u: entropy_variables(model.entropy, u),
        lambda u: entropy_hessian(model.entropy, u),
        lambda v: potential_hessian(model.potentials[direction], v),
        dx,
        dt,
        hessian_shift,
        settings,
    )


def learned_interface_flux(
    model: SymClawModel,
    direction: int,
    dx: float,
    dt: float,
    hessian_shift=0.0,
    settings: FluxSettings = FluxSettings(),
) -> Callable[[jax.Array, jax.Array], jax.Array]:
    """
    Batched entropy-stable flux of a model in one direction.

    Returns:
        Callable: (u_minus, u_plus) of shape (m, p) -> fluxes (m, p).
    """

    def single(u_minus, u_plus):
        ctx = model_flux_context(
            model, direction, u_minus, u_plus, dx, dt, hessian_shift, settings
        )
        return entropy_stable_flux(
            ctx,
            lambda u: physical_flux(model, u, direction),
            lambda u: flux_potential(model, u, direction),
        )

    return jax.vmap(single)
