import json
from unittest.mock import patch

import numpy as np
import pytest

from app.dataset import (
    TrajectoryDataset,
    component_abs_means,
    inject_noise,
    load_dataset,
    make_dataset,
    save_dataset,
)
from app.problems import sample_initial_condition
from app.reference_solver import reference_solve


def small_dataset(seed=0, xi=0.1):
    return make_dataset(
        "burgers1d",
        n_traj=3,
        xi=xi,
        seed=seed,
        n=(32,),
        L=6,
        L_train=2,
        validation_count=2,
    )


def test_noise_free_copy():
    """Zero noise returns an equal copy."""
    clean = np.ones((4, 3, 1))
    noisy = inject_noise(clean, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(noisy, clean)
    assert noisy is not clean


def test_noise_level_out_of_range():
    """Noise levels outside [0, 1] are rejected."""
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        inject_noise(np.ones(3), 1.5, np.random.default_rng(0))


def test_noise_scale_follows_component_means():
    """Noise spread scales with each component's mean magnitude."""
    clean = np.zeros((200, 100, 2))
    clean[..., 0] = 2.0
    clean[..., 1] = -0.5
    noisy = inject_noise(clean, 0.5, np.random.default_rng(1))
    spread = (noisy - clean).reshape(-1, 2).std(axis=0)
    np.testing.assert_allclose(spread, [1.0, 0.25], rtol=0.02)
    np.testing.assert_allclose(component_abs_means(clean), [2.0, 0.5])


def test_make_dataset_shapes_and_manifest():
    """Window shapes and manifest fields."""
    dataset = small_dataset()
    assert dataset.windows.shape == (3, 3, 32, 1)
    assert len(dataset) == 3
    assert dataset.cell_shape == (32,)
    manifest = dataset.manifest
    assert manifest.problem == "burgers1d"
    assert (manifest.p, manifest.d, manifest.L, manifest.L_train) == (1, 1, 6, 2)
    assert manifest.dx == pytest.approx([2.0 * np.pi / 32])
    assert all(0 <= s <= 4 for s in manifest.window_starts)
    assert dataset.validation.windows.shape == (2, 3, 32, 1)
    assert dataset.validation.manifest.component_abs_means == (
        manifest.component_abs_means
    )


def test_make_dataset_is_deterministic():
    """Same seed, same windows."""
    first, second = small_dataset(seed=5), small_dataset(seed=5)
    np.testing.assert_array_equal(first.windows, second.windows)
    assert first.manifest == second.manifest
    assert not np.array_equal(first.windows, small_dataset(seed=6).windows)


@patch("app.dataset.sample_initial_condition", wraps=sample_initial_condition)
def test_every_window_draws_its_initial_condition(mock_sample):
    """One draw per trajectory, from the trajectory's own stream."""
    dataset = small_dataset(seed=3, xi=0.0)
    assert mock_sample.call_count == 3 + 2
    problem, _, grid = mock_sample.call_args.args
    assert problem.problem_id == "burgers1d"
    assert grid.n == (32,)

    rng = np.random.default_rng(np.random.SeedSequence(3).spawn(5)[0])
    _, ic = sample_initial_condition(problem, rng, grid)
    start = int(rng.integers(0, 6 - 2 + 1))
    assert start == dataset.manifest.window_starts[0]
    trajectory = reference_solve(problem, ic, problem.dt, 6, grid)
    np.testing.assert_allclose(
        dataset.windows[0], trajectory[start : start + 3], atol=1e-14
    )


def test_window_longer_than_trajectory():
    """A training window cannot outrun the trajectory."""
    with pytest.raises(ValueError, match="exceeds"):
        make_dataset("burgers1d", 1, 0.0, 0, n=(16,), L=2, L_train=3)


def test_manifest_must_match_windows():
    """Manifest counts must agree with the windows."""
    manifest = small_dataset().manifest
    with pytest.raises(ValueError, match="do not match"):
        TrajectoryDataset(manifest, np.zeros((2, 3, 32, 1)))


def test_save_and_load(tmp_path):
    """Datasets round-trip through the manifest and blobs."""
    dataset = small_dataset()
    save_dataset(dataset, str(tmp_path))

    blob = (tmp_path / "traj_1.f64").read_bytes()
    assert len(blob) == 3 * 32 * 1 * 8
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["N_traj"] == 3
    assert (tmp_path / "validation" / "traj_1.f64").exists()

    loaded = load_dataset(str(tmp_path))
    np.testing.assert_array_equal(loaded.windows, dataset.windows)
    np.testing.assert_array_equal(
        loaded.validation.windows, dataset.validation.windows
    )
    assert loaded.manifest == dataset.manifest
