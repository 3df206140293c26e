"""Desk-scale training runs; select with ``pytest -m slow``."""

import numpy as np
import pytest

from app.data_models import TrainConfig
from app.dataset import make_dataset
from app.metrics import evaluate
from app.training import train

pytestmark = pytest.mark.slow


def train_desk(tmp_path, problem, n, n_traj, epochs, xi=0.0):
    dataset = make_dataset(problem, n_traj, xi, seed=0, n=n, validation_count=10)
    cfg = TrainConfig(epochs=epochs, n_traj=n_traj, seed=0)
    return train(dataset, cfg, str(tmp_path))


@pytest.mark.parametrize("xi", [0.0, 0.5])
def test_desk_burgers(tmp_path, xi):
    """Burgers learns to the target error and stays conservative."""
    result = train_desk(tmp_path, "burgers1d", (128,), 20, 50, xi=xi)
    report = evaluate(result.best_checkpoint, "burgers1d", 1.0)

    assert np.max(report.data["conservation"].values) <= 1e-12
    assert np.max(report.data["entropy_boundary"].values) <= 1e-8
    if xi == 0.0:
        assert result.best_val_loss < 0.05
        assert float(report.data["error"].values[-1]) <= 0.10


def test_desk_shallow_water(tmp_path):
    """Shallow water keeps mass, momentum and the entropy balance."""
    result = train_desk(tmp_path, "shallow_water", (128,), 30, 30)
    report = evaluate(result.best_checkpoint, "shallow_water", 0.75)

    assert np.max(report.data["conservation"].values) <= 1e-11
    assert np.max(report.data["entropy_boundary"].values) <= 1e-8


def test_burgers2d_smoke(tmp_path):
    """A short 2D Burgers run trains and conserves."""
    result = train_desk(tmp_path, "burgers2d", (32, 32), 5, 5)
    assert np.isfinite(result.best_val_loss)
    report = evaluate(result.best_checkpoint, "burgers2d", 0.1)
    assert np.max(report.data["conservation"].values) <= 1e-11
