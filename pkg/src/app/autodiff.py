"""
Input derivatives of small scalar networks.

Functions are traced once into a ``Tape`` of primitive operations so that the set
of operations a network relies on is closed and auditable; derivatives are then
taken with JAX's reverse rules for exactly those primitives. Hessians use
forward-over-reverse with one seed direction per input component.
"""

from collections.abc import Callable
from typing import Any, NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from app.exceptions import UnsupportedOperationError
from app.symclaw_logger import logger

try:
    from jax.extend.core import Literal
except ImportError:  # older jax
    from jax.core import Literal

# primitive name -> op kind
ARITHMETIC_OPS = {
    "dot_general": "affine",
    "add": "affine",
    "add_any": "affine",
    "sub": "affine",
    "neg": "affine",
    "mul": "product",
    "integer_pow": "square",
    "square": "square",
    "tanh": "tanh",
    "exp": "softplus",
    "log1p": "softplus",
    "log": "softplus",
    "max": "max",
    "reduce_max": "max",
    "abs": "huber",
    "sign": "huber",
    "select_n": "huber",
    "gt": "huber",
    "ge": "huber",
    "lt": "huber",
    "le": "huber",
    "eq": "huber",
    "ne": "huber",
    "reduce_sum": "sum",
    "div": "reciprocal",
    "sqrt": "sqrt",
    "rsqrt": "sqrt",
}

LAYOUT_OPS = {
    name: "layout"
    for name in (
        "broadcast_in_dim",
        "reshape",
        "squeeze",
        "expand_dims",
        "transpose",
        "slice",
        "dynamic_slice",
        "gather",
        "concatenate",
        "convert_element_type",
        "copy",
        "copy_p",
        "iota",
        "pad",
        "stop_gradient",
    )
}

SUPPORTED_OPS = {**ARITHMETIC_OPS, **LAYOUT_OPS}

# wrappers whose body is recorded in place
CALL_PRIMITIVES = {
    "pjit",
    "jit",
    "closed_call",
    "core_call",
    "custom_jvp_call",
    "custom_vjp_call",
    "custom_vjp_call_jaxpr",
    "remat",
    "checkpoint",
}


class TapeNode(NamedTuple):
    node_id: int
    op_kind: str
    inputs: tuple[int, ...]
    value: Any
    primitive: Any = None
    params: dict | None = None


class DualValue(NamedTuple):
    """
    Forward-mode pair: ``tangent[:, k]`` is the directional derivative of
    ``primal`` along seed ``k``.
    """

    primal: jax.Array
    tangent: jax.Array


class Tape:
    """
    Straight-line record of a function evaluated at concrete inputs.

    Args:
        fn (Callable): Function of array arguments built from supported ops.
        *args: Concrete example inputs.

    Raises:
        UnsupportedOperationError: If ``fn`` uses a primitive outside
            ``SUPPORTED_OPS`` (control flow included).
    """

    def __init__(self, fn: Callable, *args):
        self.nodes: list[TapeNode] = []
        self.counter = 0
        closed = jax.make_jaxpr(fn)(*args)
        self.input_ids = [self._push("input", (), jnp.asarray(a)) for a in args]
        self.output_ids = self._record(closed.jaxpr, closed.consts, self.input_ids)
        logger.debug(
            "Recorded tape with %d nodes, op kinds %s", len(self.nodes), self.op_kinds
        )

    @property
    def op_kinds(self) -> set[str]:
        return {node.op_kind for node in self.nodes}

    @property
    def outputs(self) -> list:
        return [self.nodes[i].value for i in self.output_ids]

    def _push(self, op_kind, inputs, value, primitive=None, params=None) -> int:
        node_id = self.counter
        self.nodes.append(
            TapeNode(node_id, op_kind, tuple(inputs), value, primitive, params)
        )
        self.counter += 1
        return node_id

    def _read(self, env: dict, var) -> int:
        if isinstance(var, Literal):
            return self._push("const", (), var.val)
        return env[var]

    def _record(self, jaxpr, consts, in_ids) -> list[int]:
        env = {}
        for var, const in zip(jaxpr.constvars, consts, strict=True):
            env[var] = self._push("const", (), const)
        for var, node_id in zip(jaxpr.invars, in_ids, strict=True):
            env[var] = node_id

        for eqn in jaxpr.eqns:
            ids = [self._read(env, var) for var in eqn.invars]
            name = eqn.primitive.name
            if name in CALL_PRIMITIVES:
                out_ids = self._record(*_inner_jaxpr(eqn), ids)
            else:
                op_kind = SUPPORTED_OPS.get(name)
                if op_kind is None or eqn.primitive.multiple_results:
                    logger.error("Cannot record primitive %s", name)
                    raise UnsupportedOperationError(name)
                value = eqn.primitive.bind(
                    *[self.nodes[i].value for i in ids], **eqn.params
                )
                out_ids = [self._push(op_kind, ids, value, eqn.primitive, eqn.params)]
            for var, node_id in zip(eqn.outvars, out_ids, strict=True):
                env[var] = node_id
        return [self._read(env, var) for var in jaxpr.outvars]

    def replay(self, *args) -> list:
        """
        Re-evaluates every recorded primitive from the leaves.

        Args:
            *args: Optional replacement inputs (same shapes); defaults to the
                recorded ones.

        Returns:
            list: Output values of the replay.
        """
        values = [node.value for node in self.nodes]
        for node_id, arg in zip(self.input_ids, args, strict=False):
            values[node_id] = jnp.asarray(arg)
        for node in self.nodes:
            if node.primitive is not None:
                values[node.node_id] = node.primitive.bind(
                    *[values[i] for i in node.inputs], **node.params
                )
        return [values[i] for i in self.output_ids]

    def replay_matches(self) -> bool:
        """True when a replay reproduces every recorded output bit for bit."""
        return all(
            np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)
            for a, b in zip(self.replay(), self.outputs, strict=True)
        )


def _inner_jaxpr(eqn) -> tuple:
    for key in ("jaxpr", "call_jaxpr", "fun_jaxpr"):
        inner = eqn.params.get(key)
        if inner is None:
            continue
        if hasattr(inner, "consts"):
            return inner.jaxpr, inner.consts
        return inner, []
    raise UnsupportedOperationError(eqn.primitive.name)


def _check_scalar(tape: Tape) -> None:
    if len(tape.outputs) != 1 or np.size(tape.outputs[0]) != 1:
        raise ValueError("Differentiated function must return a single scalar")


def input_gradient(f: Callable, x: jax.Array) -> jax.Array:
    """Reverse-mode gradient of a scalar function (traceable, no audit)."""
    return jax.grad(f)(x)


def forward_over_reverse(
    f: Callable, x: jax.Array, seeds: jax.Array | None = None
) -> DualValue:
    """
    Pushes seed directions through the reverse-mode gradient of ``f``.

    Args:
        f (Callable): Scalar function of a vector.
        x (jax.Array): Evaluation point, shape (p,).
        seeds (jax.Array | None): Seed directions, shape (k, p). Identity when
            omitted.

    Returns:
        DualValue: ``primal`` is the gradient (p,), ``tangent`` is (p, k) with
        column k equal to the Hessian applied to seed k.
    """
    grad_f = jax.grad(f)
    if seeds is None:
        seeds = jnp.eye(x.shape[0], dtype=x.dtype)
    tangent = jax.vmap(lambda s: jax.jvp(grad_f, (x,), (s,))[1])(seeds)
    return DualValue(primal=grad_f(x), tangent=tangent.T)


def symmetrize(matrix: jax.Array) -> jax.Array:
    """(M + M^T) / 2."""
    return 0.5 * (matrix + matrix.T)


def input_hessian(f: Callable, x: jax.Array) -> jax.Array:
    """Forward-over-reverse Hessian, symmetrized (traceable, no audit)."""
    return symmetrize(forward_over_reverse(f, x).tangent)


def grad(f: Callable, x: jax.Array) -> jax.Array:
    """
    Gradient of a scalar function after auditing its operations.

    Args:
        f (Callable): Scalar function of one vector argument.
        x (jax.Array): Evaluation point.

    Returns:
        jax.Array: The gradient of ``f`` at ``x``.

    Raises:
        UnsupportedOperationError: If ``f`` uses an unsupported op.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    _check_scalar(Tape(f, x))
    return input_gradient(f, x)


def hessian(f: Callable, x: jax.Array) -> jax.Array:
    """
    Exactly symmetric Hessian of a scalar function of at most 3 variables.

    Raises:
        UnsupportedOperationError: If ``f`` uses an unsupported op.
        ValueError: If ``x`` has more than 3 components.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.ndim != 1 or x.shape[0] > 3:
        logger.error("Hessian requested for input of shape %s", x.shape)
        raise ValueError(f"hessian supports vectors of length <= 3, got {x.shape}")
    _check_scalar(Tape(f, x))
    return input_hessian(f, x)
