import pytest

from app.selftest import (
    CheckResult,
    check_entropy_conservation,
    check_hyperbolicity,
    check_stabilizers,
    check_structural_conservation,
    gradient_errors,
    run_selftest,
    spatial_orders,
    temporal_order,
)


def test_stabilizers():
    """Shift, clipping and fallback constants behave exactly."""
    result = check_stabilizers()
    assert result.passed, result.detail


def test_temporal_order_is_three():
    """Observed time order of TVDRK3."""
    assert temporal_order() == pytest.approx(3.0, abs=0.1)


def test_spatial_order_is_fifth():
    """Observed space order of WENO5 on smooth advection."""
    assert min(spatial_orders()) >= 4.5


def test_entropy_conservation_identity():
    """The identity check passes on random networks."""
    result = check_entropy_conservation(instances=120, networks_per_dim=1)
    assert result.passed, result.detail


def test_hyperbolicity():
    """Learned flux Jacobians have real eigenvalues."""
    result = check_hyperbolicity(instances=60, networks_per_dim=1)
    assert result.passed, result.detail


def test_structural_conservation():
    """Periodic learned rollouts conserve to round-off."""
    result = check_structural_conservation(n=32, steps=20)
    assert result.passed, result.detail


def test_loss_gradient_matches_finite_differences():
    """Analytic loss gradients match central differences."""
    assert gradient_errors().max() <= 1e-5


def test_run_selftest_reports_failures():
    """A failing or raising check fails the whole run."""
    def passing():
        return CheckResult("ok", True, "")

    def failing():
        return CheckResult("bad", False, "off by one")

    def broken():
        raise RuntimeError("boom")

    assert run_selftest([passing, passing])
    assert not run_selftest([passing, failing])
    assert not run_selftest([broken, passing])
