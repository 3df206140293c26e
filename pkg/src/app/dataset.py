"""
Training data: noisy trajectory windows generated with the reference solver,
plus a fixed-size validation split, stored as a JSON manifest and raw
little-endian float64 blobs.
"""

import json
import posixpath

import fsspec
import numpy as np

from app.data_models import DatasetManifest
from app.problems import ProblemSpec, get_problem, sample_initial_condition
from app.reference_solver import reference_solve
from app.symclaw_logger import logger

VALIDATION_COUNT = 40
VALIDATION_DIR = "validation"
MANIFEST_NAME = "manifest.json"


class TrajectoryDataset:
    """
    Windows of shape (N_traj, L_train+1) + cell shape + (p,) and their manifest.

    Args:
        manifest (DatasetManifest): Provenance and grid metadata.
        windows (np.ndarray): Noisy training windows.
        validation (TrajectoryDataset | None): Held-out windows, same format.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        windows: np.ndarray,
        validation: "TrajectoryDataset | None" = None,
    ):
        self.manifest = manifest
        self.windows = np.asarray(windows, dtype=np.float64)
        self.validation = validation
        expected = (manifest.N_traj, manifest.L_train + 1)
        if self.windows.shape[:2] != expected:
            raise ValueError(
                f"Windows of shape {self.windows.shape} do not match "
                f"manifest {expected}"
            )

    @property
    def problem(self) -> ProblemSpec:
        return get_problem(self.manifest.problem, g=self.manifest.g)

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.manifest.n))

    def __len__(self) -> int:
        return self.manifest.N_traj


def component_abs_means(windows: np.ndarray) -> np.ndarray:
    """Mean absolute value per component over every window, step and cell."""
    p = windows.shape[-1]
    return np.abs(windows).reshape(-1, p).mean(axis=0)


def inject_noise(
    trajectory: np.ndarray,
    xi: float,
    rng: np.random.Generator,
    abs_means: np.ndarray | None = None,
) -> np.ndarray:
    """
    Adds i.i.d. Gaussian noise of standard deviation xi * mean|u| per component.

    Args:
        trajectory (np.ndarray): Clean values, last axis = components.
        xi (float): Noise level in [0, 1].
        rng (np.random.Generator): Noise stream.
        abs_means (np.ndarray | None): Per-component scale; computed from
            ``trajectory`` when omitted.

    Returns:
        np.ndarray: Noisy copy.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"Noise level must lie in [0, 1], got {xi}")
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if xi == 0.0:
        return trajectory.copy()
    if abs_means is None:
        abs_means = component_abs_means(trajectory)
    return trajectory + xi * np.asarray(abs_means) * rng.standard_normal(
        trajectory.shape
    )


def _simulate_windows(
    problem: ProblemSpec,
    rngs: list[np.random.Generator],
    n: tuple[int, ...],
    dt: float,
    L: int,
    L_train: int,
) -> tuple[np.ndarray, list[int]]:
    grid = problem.make_grid(n)
    windows, starts = [], []
    for k, rng in enumerate(rngs):
        params, ic = sample_initial_condition(problem, rng, grid)
        start = int(rng.integers(0, L - L_train + 1))
        trajectory = reference_solve(problem, ic, dt, L, grid)
        windows.append(trajectory[start : start + L_train + 1])
        starts.append(start)
        logger.debug("Trajectory %d: parameters %s, window start %d", k, params, start)
    return np.stack(windows), starts


def make_dataset(
    problem_id: str,
    n_traj: int,
    xi: float,
    seed: int,
    n: tuple[int, ...] | None = None,
    L: int | None = None,
    L_train: int | None = None,
    dt: float | None = None,
    validation_count: int = VALIDATION_COUNT,
) -> TrajectoryDataset:
    """
    Generates training and validation windows for a benchmark.

    Every trajectory owns a random stream spawned from ``seed``; it draws the
    initial-condition parameters, the window start and the noise.

    Args:
        problem_id (str): Benchmark id.
        n_traj (int): Number of training windows.
        xi (float): Noise level.
        seed (int): Root seed.
        n, L, L_train, dt: Overrides of the problem defaults.
        validation_count (int): Number of validation windows.

    Returns:
        TrajectoryDataset: Noisy windows with a validation split attached.
    """
    problem = get_problem(problem_id)
    n = tuple(n) if n is not None else problem.n
    L = problem.L if L is None else L
    L_train = problem.L_train if L_train is None else L_train
    dt = problem.dt if dt is None else dt
    if L_train > L:
        raise ValueError(f"L_train={L_train} exceeds L={L}")
    grid = problem.make_grid(n)

    streams = np.random.SeedSequence(seed).spawn(n_traj + validation_count)
    rngs = [np.random.default_rng(s) for s in streams]
    logger.info(
        "Generating %d training and %d validation windows for %s on %s cells",
        n_traj,
        validation_count,
        problem_id,
        n,
    )
    clean, starts = _simulate_windows(problem, rngs[:n_traj], n, dt, L, L_train)
    abs_means = component_abs_means(clean)
    noisy = np.stack(
        [
            inject_noise(w, xi, rng, abs_means)
            for w, rng in zip(clean, rngs[:n_traj], strict=True)
        ]
    )

    def manifest(count, window_starts):
        return DatasetManifest(
            problem=problem_id,
            p=problem.p,
            d=problem.d,
            n=list(n),
            dx=list(grid.dx),
            dt=dt,
            L=L,
            L_train=L_train,
            N_traj=count,
            xi=xi,
            g=problem.g,
            seed=seed,
            window_starts=window_starts,
            component_abs_means=abs_means.tolist(),
        )

    validation = None
    if validation_count:
        val_clean, val_starts = _simulate_windows(
            problem, rngs[n_traj:], n, dt, L, L_train
        )
        val_noisy = np.stack(
            [
                inject_noise(w, xi, rng, abs_means)
                for w, rng in zip(val_clean, rngs[n_traj:], strict=True)
            ]
        )
        validation = TrajectoryDataset(
            manifest(validation_count, val_starts), val_noisy
        )
    return TrajectoryDataset(manifest(n_traj, starts), noisy, validation)


def _write_windows(dataset: TrajectoryDataset, out_dir: str) -> None:
    fs, root = fsspec.core.url_to_fs(out_dir)
    fs.makedirs(root, exist_ok=True)
    with fs.open(posixpath.join(root, MANIFEST_NAME), "w") as f:
        f.write(dataset.manifest.model_dump_json(indent=2))
    for k, window in enumerate(dataset.windows):
        with fs.open(posixpath.join(root, f"traj_{k}.f64"), "wb") as f:
            f.write(np.ascontiguousarray(window, dtype="<f8").tobytes())


def save_dataset(dataset: TrajectoryDataset, out_dir: str) -> None:
    """
    Writes ``manifest.json`` and ``traj_<k>.f64`` (layout [time][cell][component])
    to ``out_dir``, and the validation split to ``out_dir/validation``.
    """
    try:
        _write_windows(dataset, out_dir)
        if dataset.validation is not None:
            _write_windows(dataset.validation, posixpath.join(out_dir, VALIDATION_DIR))
    except OSError as e:
        logger.error("Error writing dataset to %s: %s", out_dir, e)
        raise
    logger.info("Saved %d windows to %s", len(dataset), out_dir)


def _read_windows(data_dir: str) -> TrajectoryDataset:
    fs, root = fsspec.core.url_to_fs(data_dir)
    with fs.open(posixpath.join(root, MANIFEST_NAME), "r") as f:
        manifest = DatasetManifest(**json.load(f))
    shape = (manifest.L_train + 1, *reversed(manifest.n), manifest.p)
    windows = []
    for k in range(manifest.N_traj):
        with fs.open(posixpath.join(root, f"traj_{k}.f64"), "rb") as f:
            windows.append(np.frombuffer(f.read(), dtype="<f8").reshape(shape))
    windows = np.stack(windows) if windows else np.zeros((0, *shape))
    return TrajectoryDataset(manifest, windows)


def load_dataset(data_dir: str) -> TrajectoryDataset:
    """Reads a dataset written by :func:`save_dataset`."""
    dataset = _read_windows(data_dir)
    fs, root = fsspec.core.url_to_fs(data_dir)
    val_dir = posixpath.join(root, VALIDATION_DIR)
    if fs.exists(posixpath.join(val_dir, MANIFEST_NAME)):
        dataset.validation = _read_windows(posixpath.join(data_dir, VALIDATION_DIR))
    logger.info(
        "Loaded %d windows of %s from %s",
        len(dataset),
        dataset.manifest.problem,
        data_dir,
    )
    return dataset
