import jax.numpy as jnp
import numpy as np
import pytest

from app.jacobi import (
    jacobi_eigenvalues,
    jacobi_eigh,
    power_iteration_radius,
    symmetric_product,
    wave_speed,
)


def random_symmetric(rng, p):
    m = rng.standard_normal((p, p))
    return 0.5 * (m + m.T)


def test_diagonal_matrix():
    """A diagonal matrix returns its sorted diagonal."""
    result = jacobi_eigenvalues(jnp.diag(jnp.array([3.0, -1.0, 2.0])))
    np.testing.assert_array_equal(result, [-1.0, 2.0, 3.0])


def test_matches_numpy_and_reconstructs():
    """Eigenpairs agree with LAPACK and rebuild the matrix."""
    rng = np.random.default_rng(0)
    for p in (1, 2, 3):
        for _ in range(20):
            m = random_symmetric(rng, p)
            eig = jacobi_eigh(jnp.asarray(m))
            np.testing.assert_allclose(
                eig.eigenvalues, np.linalg.eigvalsh(m), atol=1e-12
            )
            v = np.asarray(eig.rotation)
            np.testing.assert_allclose(v.T @ v, np.eye(p), atol=1e-12)
            np.testing.assert_allclose(
                v @ np.diag(eig.eigenvalues) @ v.T, m, atol=1e-12
            )


def test_repeated_eigenvalues():
    """Repeated eigenvalues need no rotation."""
    result = jacobi_eigenvalues(jnp.eye(3) * 2.0)
    np.testing.assert_allclose(result, [2.0, 2.0, 2.0])


def test_non_finite_input():
    """Non-finite entries are rejected."""
    with pytest.raises(ValueError, match="non-finite"):
        jacobi_eigenvalues(jnp.array([[1.0, jnp.nan], [jnp.nan, 1.0]]))


def test_scalar_wave_speed():
    """In one component the wave speed is |a b|."""
    assert float(wave_speed(jnp.array([[-2.0]]), jnp.array([[3.0]]))) == 6.0


def test_wave_speed_matches_nonsymmetric_product():
    """The symmetric form gives the spectral radius of A B."""
    rng = np.random.default_rng(1)
    for p in (2, 3):
        for _ in range(20):
            a = random_symmetric(rng, p)
            root = rng.standard_normal((p, p))
            b = root @ root.T + 0.1 * np.eye(p)
            expected = np.abs(np.linalg.eigvals(a @ b)).max()
            result = float(wave_speed(jnp.asarray(a), jnp.asarray(b)))
            assert abs(result - expected) <= 1e-10 * max(expected, 1.0)


def test_symmetric_product_is_similar_to_product():
    """B^1/2 A B^1/2 has the spectrum of A B."""
    a = np.array([[1.0, 2.0], [2.0, -1.0]])
    b = np.array([[2.0, 0.5], [0.5, 1.0]])
    sym = np.asarray(symmetric_product(jnp.asarray(a), jnp.asarray(b)))
    np.testing.assert_allclose(sym, sym.T)
    np.testing.assert_allclose(
        np.sort(np.linalg.eigvalsh(sym)), np.sort(np.linalg.eigvals(a @ b).real)
    )


def test_power_iteration_radius():
    """Power iteration finds the spectral radius of A B."""
    a = np.diag([1.0, -3.0])
    b = np.diag([2.0, 1.0])
    assert power_iteration_radius(a, b) == pytest.approx(3.0, rel=1e-12)
    assert power_iteration_radius(np.zeros((2, 2)), b) == 0.0


@pytest.mark.parametrize("p", [2, 3])
def test_off_diagonal_norm_is_driven_below_tolerance(p):
    """Sweeps stop only once the off-diagonal part is negligible."""
    rng = np.random.default_rng(p)
    for _ in range(50):
        m = random_symmetric(rng, p) * 10.0 ** rng.uniform(-3, 3)
        eig = jacobi_eigh(jnp.asarray(m))
        assert float(eig.off_norm) <= 1e-12 * np.linalg.norm(m)
        v = np.asarray(eig.rotation)
        rotated = v.T @ m @ v
        off = rotated - np.diag(np.diag(rotated))
        assert np.linalg.norm(off) <= 1e-12 * np.linalg.norm(m)
