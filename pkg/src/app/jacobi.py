"""
Cyclic Jacobi eigen-solver for the small (p <= 3) symmetric matrices met at
every cell interface, and the wave speed built on top of it.
"""

from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from app.autodiff import symmetrize
from app.symclaw_logger import logger

MAX_SWEEPS = 30
TOLERANCE = 1e-14
_TINY = 1e-300


class SmallSymmetricEig(NamedTuple):
    matrix: jax.Array
    eigenvalues: jax.Array
    rotation: jax.Array
    off_norm: jax.Array


def _off_norm(a: jax.Array) -> jax.Array:
    return jnp.sqrt(jnp.sum(jnp.square(a - jnp.diag(jnp.diag(a)))))


def _rotate(a: jax.Array, v: jax.Array, i: int, j: int):
    a_ij = a[i, j]
    nonzero = jnp.abs(a_ij) > _TINY
    safe_aij = jnp.where(nonzero, a_ij, 1.0)
    theta = (a[j, j] - a[i, i]) / (2.0 * safe_aij)
    sign = jnp.where(theta >= 0.0, 1.0, -1.0)
    t = sign / (jnp.abs(theta) + jnp.sqrt(theta**2 + 1.0))
    t = jnp.where(nonzero, t, 0.0)
    c = 1.0 / jnp.sqrt(t**2 + 1.0)
    s = t * c
    rot = jnp.eye(a.shape[0], dtype=a.dtype)
    rot = rot.at[i, i].set(c).at[j, j].set(c).at[i, j].set(s).at[j, i].set(-s)
    return rot.T @ a @ rot, v @ rot


def jacobi_eigh(matrix: jax.Array, max_sweeps: int = MAX_SWEEPS) -> SmallSymmetricEig:
    """
    Eigen-decomposition by cyclic Jacobi sweeps.

    Sweeps stop changing the matrix once the off-diagonal Frobenius norm drops to
    ``TOLERANCE`` times the norm of the input; the sweep count is fixed so the
    routine can be traced and reverse-differentiated.

    Args:
        matrix (jax.Array): Symmetric matrix (p, p); symmetrized on entry.
        max_sweeps (int): Number of sweeps.

    Returns:
        SmallSymmetricEig: Ascending eigenvalues and matching eigenvector columns.
    """
    m = symmetrize(jnp.asarray(matrix, dtype=jnp.float64))
    p = m.shape[0]
    threshold = TOLERANCE * jnp.sqrt(jnp.sum(jnp.square(m)))
    pairs = [(i, j) for i in range(p - 1) for j in range(i + 1, p)]

    def sweep(_, carry):
        a, v = carry
        done = _off_norm(a) <= threshold
        a_new, v_new = a, v
        for i, j in pairs:
            a_new, v_new = _rotate(a_new, v_new, i, j)
        return jnp.where(done, a, a_new), jnp.where(done, v, v_new)

    a, v = jax.lax.fori_loop(
        0, max_sweeps, sweep, (m, jnp.eye(p, dtype=m.dtype))
    )
    diag = jnp.diag(a)
    order = jnp.argsort(diag)
    return SmallSymmetricEig(
        matrix=m, eigenvalues=diag[order], rotation=v[:, order], off_norm=_off_norm(a)
    )


def jacobi_eigenvalues(matrix: jax.Array) -> jax.Array:
    """
    Ascending eigenvalues of a small symmetric matrix.

    Raises:
        ValueError: If a concrete input has non-finite entries.
    """
    if not isinstance(matrix, jax.core.Tracer) and not np.all(
        np.isfinite(np.asarray(matrix))
    ):
        logger.error("Non-finite matrix passed to the eigen-solver: %s", matrix)
        raise ValueError("jacobi_eigenvalues: non-finite matrix entries")
    return jacobi_eigh(matrix).eigenvalues


def _safe_sqrt(x: jax.Array) -> jax.Array:
    positive = x > 0.0
    return jnp.where(positive, jnp.sqrt(jnp.where(positive, x, 1.0)), 0.0)


def symmetric_product(a: jax.Array, b: jax.Array) -> jax.Array:
    """B^{1/2} A B^{1/2}, similar to A B; negative eigenvalues of B clamped to 0."""
    eig = jacobi_eigh(b)
    half = (eig.rotation * _safe_sqrt(eig.eigenvalues)) @ eig.rotation.T
    return symmetrize(half @ symmetrize(a) @ half)


def wave_speed(a: jax.Array, b: jax.Array) -> jax.Array:
    """
    Spectral radius of the flux Jacobian A B through its symmetric similar form.

    Args:
        a (jax.Array): Symmetric potential Hessian (p, p).
        b (jax.Array): Positive semidefinite entropy Hessian (p, p).

    Returns:
        jax.Array: Largest absolute eigenvalue.
    """
    if a.shape[0] == 1:
        return jnp.abs(a[0, 0] * jnp.maximum(b[0, 0], 0.0))
    return jnp.max(jnp.abs(jacobi_eigh(symmetric_product(a, b)).eigenvalues))


def power_iteration_radius(
    a: np.ndarray, b: np.ndarray, iterations: int = 2000, seed: int = 0
) -> float:
    """
    Spectral radius of the nonsymmetric product A B by power iteration on its
    square (eigenvalues of equal magnitude and opposite sign do not stall it).
    """
    product = np.asarray(a) @ np.asarray(b)
    square = product @ product
    x = np.random.default_rng(seed).standard_normal(product.shape[0])
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = square @ x
        estimate = np.linalg.norm(y)
        if estimate == 0.0:
            return 0.0
        x = y / estimate
    return float(np.sqrt(estimate))
