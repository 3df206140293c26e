import jax
import jax.numpy as jnp
import numpy as np
import pytest

from app.exceptions import DimensionMismatchError
from app.networks import (
    entropy_flux,
    entropy_hessian,
    entropy_variables,
    fcnn_eval,
    flux_in_entropy_vars,
    flux_jacobian_factors,
    huber,
    icnn_eval,
    physical_flux,
    project_icnn,
    softplus,
)
from tests.test_resources import small_model


def test_layer_sizes():
    """Layer sizes follow the hidden widths."""
    model = small_model(p=3, d=2, fcnn_hidden=(5, 6), icnn_hidden=(7, 8))
    assert model.p == 3
    assert model.d == 2
    assert model.potentials[1].layer_sizes == [3, 5, 6, 1]
    assert model.entropy.layer_sizes == [3, 7, 8, 1]


def test_projection_keeps_recursion_weights_nonnegative():
    """Projection clamps the recursion and output weights only."""
    model = small_model(p=2)
    assert all(bool(jnp.all(w >= 0.0)) for w in model.entropy.wz)
    assert bool(jnp.all(model.entropy.w_out >= 0.0))

    shifted = model.entropy._replace(w_out=model.entropy.w_out - 10.0)
    projected = project_icnn(shifted)
    assert bool(jnp.all(projected.w_out == 0.0))
    assert projected.wx[0] is shifted.wx[0]


def test_first_icnn_layer_reads_the_input_only():
    """Recursion weights start at the second hidden layer."""
    model = small_model(p=2, icnn_hidden=(4, 5, 6))
    icnn = model.entropy
    assert icnn.layer_sizes == [2, 4, 5, 6, 1]
    assert [w.shape for w in icnn.wz] == [(5, 4), (6, 5)]
    assert [w.shape for w in icnn.wx] == [(4, 2), (5, 2), (6, 2)]

    negative = icnn._replace(wx=(-jnp.abs(icnn.wx[0]) - 1.0,) + icnn.wx[1:])
    projected = project_icnn(negative)
    np.testing.assert_array_equal(projected.wx[0], negative.wx[0])
    assert bool(jnp.all(projected.wx[0] < 0.0))


def test_wrong_input_dimension():
    """Inputs of the wrong dimension are rejected."""
    model = small_model(p=2)
    with pytest.raises(DimensionMismatchError):
        fcnn_eval(model.potentials[0], jnp.ones(3))
    with pytest.raises(DimensionMismatchError):
        icnn_eval(model.entropy, jnp.ones(1))


def test_activations():
    """Softplus is stable at extremes and Huber switches at 1."""
    x = jnp.array([-800.0, -1.0, 0.0, 2.0, 800.0])
    np.testing.assert_allclose(softplus(x), np.logaddexp(0.0, np.asarray(x)))
    np.testing.assert_allclose(huber(jnp.array([-3.0, 0.5, 1.0])), [2.5, 0.125, 0.5])


def test_entropy_is_convex():
    """The learned entropy satisfies the convexity inequality."""
    model = small_model(p=3, seed=4)
    rng = np.random.default_rng(0)
    u1 = rng.uniform(-2.0, 2.0, (1000, 3))
    u2 = rng.uniform(-2.0, 2.0, (1000, 3))
    lam = rng.uniform(0.0, 1.0, (1000, 1))
    eta = jax.vmap(lambda u: icnn_eval(model.entropy, u))
    lhs = eta(lam * u1 + (1.0 - lam) * u2)
    rhs = lam[:, 0] * eta(u1) + (1.0 - lam[:, 0]) * eta(u2)
    assert bool(jnp.all(lhs <= rhs + 1e-10))


def test_entropy_hessian_is_positive_semidefinite():
    """Entropy Hessians have no negative eigenvalues."""
    model = small_model(p=3, seed=2)
    states = np.random.default_rng(1).uniform(-3.0, 3.0, (200, 3))
    hessians = jax.vmap(lambda u: entropy_hessian(model.entropy, u))(states)
    assert np.linalg.eigvalsh(np.asarray(hessians)).min() >= -1e-10


def test_flux_jacobian_is_product_of_hessians():
    """df/du equals the potential Hessian times the entropy Hessian."""
    model = small_model(p=2, d=2, seed=3)
    u = jnp.array([0.4, -0.7])
    for direction in range(2):
        jacobian = jax.jacfwd(lambda x, i=direction: physical_flux(model, x, i))(u)
        a, b = flux_jacobian_factors(model, u, direction)
        np.testing.assert_allclose(jacobian, a @ b, atol=1e-10)


def test_entropy_pair_compatibility():
    """grad q equals grad eta times df/du."""
    model = small_model(p=3, seed=5)
    u = jnp.array([0.2, 0.1, -0.4])
    grad_g = jax.grad(lambda x: entropy_flux(model, x, 0))(u)
    jacobian = jax.jacfwd(lambda x: physical_flux(model, x, 0))(u)
    v = entropy_variables(model.entropy, u)
    np.testing.assert_allclose(grad_g, v @ jacobian, atol=1e-10)


def test_flux_in_entropy_vars_matches_finite_differences():
    """The flux in entropy variables is the gradient of the potential."""
    model = small_model(p=2, fcnn_hidden=(6,))
    potential = model.potentials[0]
    v = jnp.array([0.3, -0.7])
    h = 1e-6
    numeric = [
        (fcnn_eval(potential, v + h * e) - fcnn_eval(potential, v - h * e)) / (2 * h)
        for e in jnp.eye(2)
    ]
    np.testing.assert_allclose(
        flux_in_entropy_vars(potential, v), np.ravel(numeric), rtol=1e-6, atol=1e-9
    )
    u = jnp.array([0.1, 0.2])
    np.testing.assert_array_equal(
        physical_flux(model, u, 0),
        flux_in_entropy_vars(potential, entropy_variables(model.entropy, u)),
    )
