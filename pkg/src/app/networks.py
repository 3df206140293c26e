"""
Flux potentials (plain feedforward networks) and the entropy (input-convex
network) that together define a learned conservation law.

A model holds one scalar potential per spatial direction and one shared convex
entropy. The physical flux in direction i is the gradient of the potential
evaluated at the entropy variables, which makes the flux Jacobian a product of two
symmetric matrices, the second one positive semidefinite.
"""

from typing import NamedTuple

import jax
import jax.numpy as jnp

from app.autodiff import Tape, input_gradient, input_hessian
from app.exceptions import DimensionMismatchError
from app.symclaw_logger import logger


class FcnnParams(NamedTuple):
    weights: tuple[jax.Array, ...]
    biases: tuple[jax.Array, ...]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]


class IcnnParams(NamedTuple):
    """
    Convex network parameters. The first hidden layer sees the input only through
    ``wx[0]``. ``wz[l]`` multiplies hidden layer l and feeds layer l+1; it must
    stay nonnegative, like ``w_out``. ``wx[l]`` are unconstrained input skips,
    ``w_s`` the quadratic input weights (used through :func:`huber`) and ``w_l``
    the linear ones.
    """

    wz: tuple[jax.Array, ...]
    wx: tuple[jax.Array, ...]
    b: tuple[jax.Array, ...]
    w_out: jax.Array
    b_out: jax.Array
    w_s: jax.Array
    w_l: jax.Array

    @property
    def layer_sizes(self) -> list[int]:
        return [self.wx[0].shape[1]] + [w.shape[0] for w in self.wx] + [1]


class SymClawModel(NamedTuple):
    potentials: tuple[FcnnParams, ...]
    entropy: IcnnParams

    @property
    def p(self) -> int:
        return self.entropy.w_s.shape[0]

    @property
    def d(self) -> int:
        return len(self.potentials)


def softplus(x: jax.Array) -> jax.Array:
    """Overflow-safe log(1 + exp(x))."""
    return jnp.maximum(x, 0.0) + jnp.log1p(jnp.exp(-jnp.abs(x)))


def huber(w: jax.Array) -> jax.Array:
    """Nonnegative reparameterization of the quadratic input weights."""
    abs_w = jnp.abs(w)
    return jnp.where(abs_w > 1.0, abs_w - 0.5, 0.5 * w**2)


def _check_input(expected: int, x: jax.Array) -> None:
    if x.shape != (expected,):
        logger.error("Network input of shape %s, expected (%d,)", x.shape, expected)
        raise DimensionMismatchError(expected, x.shape[-1] if x.ndim else 0)


def fcnn_eval(params: FcnnParams, v: jax.Array) -> jax.Array:
    """
    Scalar flux potential.

    Args:
        params (FcnnParams): Network parameters.
        v (jax.Array): Entropy variables, shape (p,).

    Returns:
        jax.Array: Scalar potential value.
    """
    _check_input(params.weights[0].shape[1], v)
    z = v
    for w, b in zip(params.weights[:-1], params.biases[:-1], strict=True):
        z = jnp.tanh(w @ z + b)
    return (params.weights[-1] @ z + params.biases[-1])[0]


def flux_in_entropy_vars(params: FcnnParams, v: jax.Array) -> jax.Array:
    """Flux as the gradient of the potential in entropy variables."""
    return input_gradient(lambda x: fcnn_eval(params, x), v)


def potential_hessian(params: FcnnParams, v: jax.Array) -> jax.Array:
    """Symmetric Hessian of a flux potential."""
    return input_hessian(lambda x: fcnn_eval(params, x), v)


def icnn_eval(params: IcnnParams, u: jax.Array) -> jax.Array:
    """
    Convex entropy value.

    Args:
        params (IcnnParams): Projected network parameters.
        u (jax.Array): Conserved state, shape (p,).

    Returns:
        jax.Array: Scalar entropy value.
    """
    _check_input(params.w_s.shape[0], u)
    z = softplus(params.wx[0] @ u + params.b[0])
    for wz, wx, b in zip(params.wz, params.wx[1:], params.b[1:], strict=True):
        z = softplus(wz @ z + wx @ u + b)
    y = (params.w_out @ z + params.b_out)[0]
    return y + jnp.sum(huber(params.w_s) * u**2) + params.w_l @ u


def entropy_variables(params: IcnnParams, u: jax.Array) -> jax.Array:
    """v = grad eta(u)."""
    return input_gradient(lambda x: icnn_eval(params, x), u)


def entropy_hessian(params: IcnnParams, u: jax.Array) -> jax.Array:
    """Symmetric Hessian of the entropy."""
    return input_hessian(lambda x: icnn_eval(params, x), u)


def project_icnn(params: IcnnParams) -> IcnnParams:
    """Clamps the recursion weights onto the nonnegative orthant."""
    return params._replace(
        wz=tuple(jnp.maximum(w, 0.0) for w in params.wz),
        w_out=jnp.maximum(params.w_out, 0.0),
    )


def physical_flux(model: SymClawModel, u: jax.Array, direction: int) -> jax.Array:
    """Learned flux f_i(u) = grad phi_i(grad eta(u))."""
    v = entropy_variables(model.entropy, u)
    return flux_in_entropy_vars(model.potentials[direction], v)


def flux_potential(model: SymClawModel, u: jax.Array, direction: int) -> jax.Array:
    """phi_i evaluated at the entropy variables of ``u``."""
    return fcnn_eval(model.potentials[direction], entropy_variables(model.entropy, u))


def entropy_flux(model: SymClawModel, u: jax.Array, direction: int) -> jax.Array:
    """Entropy flux G_i = v^T f_i - phi_i."""
    v = entropy_variables(model.entropy, u)
    params = model.potentials[direction]
    return v @ flux_in_entropy_vars(params, v) - fcnn_eval(params, v)


def flux_jacobian_factors(
    model: SymClawModel, u: jax.Array, direction: int
) -> tuple[jax.Array, jax.Array]:
    """Returns (A, B) with A the potential Hessian and B the entropy Hessian."""
    v = entropy_variables(model.entropy, u)
    return (
        potential_hessian(model.potentials[direction], v),
        entropy_hessian(model.entropy, u),
    )


def _uniform(key: jax.Array, shape: tuple, fan_in: int) -> jax.Array:
    bound = jnp.sqrt(1.0 / fan_in)
    return jax.random.uniform(
        key, shape, dtype=jnp.float64, minval=-bound, maxval=bound
    )


def init_fcnn(key: jax.Array, p: int, hidden: list[int]) -> FcnnParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    sizes = [p, *hidden, 1]
    keys = jax.random.split(key, len(sizes) - 1)
    weights = tuple(
        _uniform(k, (n_out, n_in), n_in)
        for k, n_in, n_out in zip(keys, sizes[:-1], sizes[1:], strict=True)
    )
    biases = tuple(jnp.zeros(n_out, dtype=jnp.float64) for n_out in sizes[1:])
    return FcnnParams(weights=weights, biases=biases)


def init_icnn(key: jax.Array, p: int, hidden: list[int]) -> IcnnParams:
    keys = jax.random.split(key, 2 * len(hidden) + 1)
    sizes = [p, *hidden]
    wz = tuple(
        _uniform(keys[2 * i], (sizes[i + 1], sizes[i]), sizes[i])
        for i in range(1, len(hidden))
    )
    wx = tuple(
        _uniform(keys[2 * i + 1], (sizes[i + 1], p), p) for i in range(len(hidden))
    )
    b = tuple(jnp.zeros(h, dtype=jnp.float64) for h in hidden)
    params = IcnnParams(
        wz=wz,
        wx=wx,
        b=b,
        w_out=_uniform(keys[-1], (1, hidden[-1]), hidden[-1]),
        b_out=jnp.zeros(1, dtype=jnp.float64),
        w_s=jnp.ones(p, dtype=jnp.float64),
        w_l=jnp.zeros(p, dtype=jnp.float64),
    )
    return project_icnn(params)


def init_model(
    key: jax.Array, p: int, d: int, fcnn_hidden: list[int], icnn_hidden: list[int]
) -> SymClawModel:
    """
    Creates a model and checks that both network families only use supported
    operations.
    """
    keys = jax.random.split(key, d + 1)
    model = SymClawModel(
        potentials=tuple(init_fcnn(keys[i], p, fcnn_hidden) for i in range(d)),
        entropy=init_icnn(keys[-1], p, icnn_hidden),
    )
    sample_state = jnp.full(p, 0.5, dtype=jnp.float64)
    Tape(lambda x: icnn_eval(model.entropy, x), sample_state)
    for params in model.potentials:
        Tape(lambda x, params=params: fcnn_eval(params, x), sample_state)
    logger.info(
        "Initialized model: p=%d, d=%d, potential layers %s, entropy layers %s",
        p,
        d,
        model.potentials[0].layer_sizes,
        model.entropy.layer_sizes,
    )
    return model
