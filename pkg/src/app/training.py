"""
Recurrent training of a learned conservation law on trajectory windows.
"""

import math
import posixpath
import time
from functools import lru_cache
from typing import NamedTuple

import fsspec
import jax
import jax.numpy as jnp
import numpy as np
import optax
import pandas as pd

from app.checkpoint import checkpoint_id, save_checkpoint
from app.data_models import CheckpointMetadata, TrainConfig
from app.dataset import TrajectoryDataset
from app.entropy_flux import FluxSettings, learned_interface_flux, regularization_shift
from app.exceptions import (
    NonFiniteStateError,
    TrainingDivergedError,
    ZeroNormalizationError,
)
from app.fv_kernel import Grid, GridField, assert_finite, frozen_boundaries, step_field
from app.networks import SymClawModel, init_model, project_icnn
from app.symclaw_logger import logger

LOG_COLUMNS = ["epoch", "train_loss", "val_loss", "lr", "seconds"]


class Simulator:
    """
    Compiled rollout and loss of a learned law on one grid.

    Args:
        grid (Grid): Spatial grid.
        dt (float): Fixed time step.
        settings (FluxSettings): Stabilizer constants.
    """

    def __init__(self, grid: Grid, dt: float, settings: FluxSettings):
        self.grid = grid
        self.dt = dt
        self.settings = settings
        self.rollout = jax.jit(self._rollout, static_argnums=(2,))
        self.batch_rollout = jax.jit(self._batch_rollout, static_argnums=(2,))
        self.loss = jax.jit(self._loss)
        self.loss_and_grad = jax.jit(jax.value_and_grad(self._loss))

    def interface_flux(self, model: SymClawModel, hessian_shift):
        def flux(direction, u_minus, u_plus):
            return learned_interface_flux(
                model,
                direction,
                self.grid.dx[direction],
                self.dt,
                hessian_shift,
                self.settings,
            )(u_minus, u_plus)

        return flux

    def _rollout(self, model, u0, steps, hessian_shift):
        field = GridField(u0, self.grid, frozen_boundaries(self.grid, u0))
        interface_flux = self.interface_flux(model, hessian_shift)

        def body(values, _):
            new = step_field(field.with_values(values), interface_flux, self.dt)
            return new.values, new.values

        _, states = jax.lax.scan(body, u0, None, length=steps)
        return jnp.concatenate([u0[None], states])

    def _batch_rollout(self, model, u0s, steps, hessian_shift):
        return jax.vmap(lambda u0: self._rollout(model, u0, steps, hessian_shift))(u0s)

    def _loss(self, model, windows, hessian_shift):
        steps = windows.shape[1] - 1
        predictions = self._batch_rollout(model, windows[:, 0], steps, hessian_shift)
        return jnp.sum(jnp.abs(predictions - windows)) / jnp.sum(jnp.abs(windows))


@lru_cache(maxsize=16)
def get_simulator(grid: Grid, dt: float, settings: FluxSettings) -> Simulator:
    """Cached simulator per grid, time step and settings."""
    return Simulator(grid, dt, settings)


def rollout(
    model: SymClawModel,
    u0,
    steps: int,
    epoch: float,
    grid: Grid,
    dt: float,
    settings: FluxSettings = FluxSettings(),
) -> np.ndarray:
    """
    Predicted trajectory from an observed state.

    Args:
        model (SymClawModel): Learned law.
        u0: Initial cell averages (grid.shape + (p,)).
        steps (int): Number of steps.
        epoch (float): Epoch driving the Hessian shift; ``math.inf`` for none.
        grid (Grid): Grid of ``u0``.
        dt (float): Time step.
        settings (FluxSettings): Stabilizer constants.

    Returns:
        np.ndarray: (steps+1,) + u0.shape.

    Raises:
        NonFiniteStateError: With the first step and cell that went non-finite.
    """
    shift = regularization_shift(epoch, settings.c1)
    u0 = jnp.asarray(u0, dtype=jnp.float64)
    simulator = get_simulator(grid, dt, settings)
    trajectory = np.asarray(simulator.rollout(model, u0, int(steps), shift))
    for step, state in enumerate(trajectory):
        assert_finite(state, step)
    return trajectory


def _check_denominator(windows: np.ndarray) -> None:
    if not np.any(np.asarray(windows)):
        logger.error("Recurrent loss requested on all-zero data")
        raise ZeroNormalizationError()


def recurrent_loss(
    model: SymClawModel,
    windows,
    epoch: float,
    grid: Grid,
    dt: float,
    settings: FluxSettings = FluxSettings(),
) -> float:
    """
    Normalized L1 mismatch sum|u_hat - u| / sum|u| over a batch of windows.

    Args:
        windows: Observed windows, (B, L_train+1) + grid.shape + (p,); each
            rollout starts from the first frame of its window.

    Raises:
        ValueError: On an empty batch.
        ZeroNormalizationError: If every observed value is zero.
    """
    windows = jnp.asarray(windows, dtype=jnp.float64)
    if windows.shape[0] == 0:
        raise ValueError("Empty batch")
    _check_denominator(windows)
    simulator = get_simulator(grid, dt, settings)
    shift = regularization_shift(epoch, settings.c1)
    return float(simulator.loss(model, windows, shift))


def _locate_non_finite(simulator, model, windows, shift) -> None:
    predictions = np.asarray(
        simulator.batch_rollout(model, windows[:, 0], windows.shape[1] - 1, shift)
    )
    for step in range(predictions.shape[1]):
        for state in predictions[:, step]:
            assert_finite(state, step)
    raise NonFiniteStateError(step=predictions.shape[1] - 1)


def loss_gradient(
    model: SymClawModel,
    windows,
    epoch: float,
    grid: Grid,
    dt: float,
    settings: FluxSettings = FluxSettings(),
) -> tuple[float, SymClawModel]:
    """
    Recurrent loss and its gradient with respect to every network parameter.

    The gradient flows through reconstruction, fluxes, time stepping and the
    stabilizers; the wave speed is held constant unless
    ``settings.wave_speed_gradient`` is set.

    Returns:
        tuple: (loss, gradient with the structure of ``model``).

    Raises:
        NonFiniteStateError: If the loss or gradient is not finite; locates the
            first non-finite predicted state.
    """
    windows = jnp.asarray(windows, dtype=jnp.float64)
    if windows.shape[0] == 0:
        raise ValueError("Empty batch")
    _check_denominator(windows)
    simulator = get_simulator(grid, dt, settings)
    shift = regularization_shift(epoch, settings.c1)
    loss, grads = simulator.loss_and_grad(model, windows, shift)
    finite = bool(jnp.isfinite(loss)) and all(
        bool(jnp.all(jnp.isfinite(g))) for g in jax.tree_util.tree_leaves(grads)
    )
    if not finite:
        logger.error("Non-finite loss or gradient at epoch %s", epoch)
        _locate_non_finite(simulator, model, windows, shift)
    return float(loss), grads


def lr_schedule(
    step: int, total_steps: int, cfg: TrainConfig, warmup_fraction: float = 0.1
) -> float:
    """
    One-cycle cosine schedule: warm-up from peak/div_factor to peak, then decay
    to peak/final_div_factor.

    Args:
        step (int): Optimizer step, 0 <= step < total_steps.
        total_steps (int): Steps in the whole run.
        cfg (TrainConfig): Peak rate and division factors.
        warmup_fraction (float): Used when ``cfg.warmup_fraction`` is unset.
    """
    fraction = cfg.warmup_fraction or warmup_fraction
    peak = cfg.peak_lr
    low = peak / cfg.div_factor
    final = peak / cfg.final_div_factor
    warmup_steps = max(1, int(fraction * total_steps))
    if step < warmup_steps:
        return low + (peak - low) * (1.0 - math.cos(math.pi * step / warmup_steps)) / 2
    decay_steps = max(1, total_steps - warmup_steps)
    progress = (step - warmup_steps) / decay_steps
    return final + (peak - final) * (1.0 + math.cos(math.pi * progress)) / 2


@lru_cache(maxsize=8)
def _adam(b1: float, b2: float, eps: float):
    transform = optax.scale_by_adam(b1=b1, b2=b2, eps=eps)

    @jax.jit
    def update(model, grads, state, lr):
        updates, state = transform.update(grads, state, model)
        updates = jax.tree_util.tree_map(lambda u: -lr * u, updates)
        model = optax.apply_updates(model, updates)
        return model._replace(entropy=project_icnn(model.entropy)), state

    return transform, update


def init_optimizer(model: SymClawModel, cfg: TrainConfig):
    """Adam moments (zeros) and step counter."""
    transform, _ = _adam(cfg.b1, cfg.b2, cfg.eps)
    return transform.init(model)


def adam_step(model: SymClawModel, grads, state, lr: float, cfg: TrainConfig):
    """
    Bias-corrected Adam update followed by the convexity projection.

    Returns:
        tuple: (new model, new optimizer state).
    """
    _, update = _adam(cfg.b1, cfg.b2, cfg.eps)
    return update(model, grads, state, jnp.asarray(lr, dtype=jnp.float64))


class TrainingResult(NamedTuple):
    best_checkpoint: str | None
    final_checkpoint: str
    log_path: str
    best_val_loss: float
    history: pd.DataFrame


class Trainer:
    """
    Runs the optimization loop for one dataset and configuration.

    Args:
        dataset (TrajectoryDataset): Training windows (validation attached).
        cfg (TrainConfig): Training configuration.
        out_dir (str): Directory for checkpoints and the training log.
    """

    def __init__(self, dataset: TrajectoryDataset, cfg: TrainConfig, out_dir: str):
        self.dataset = dataset
        self.cfg = cfg
        self.out_dir = out_dir
        manifest = dataset.manifest
        self.problem = dataset.problem
        self.grid = self.problem.make_grid(tuple(manifest.n))
        self.dt = manifest.dt
        self.settings = cfg.flux_settings()

        count = min(cfg.n_traj or len(dataset), len(dataset))
        self.windows = dataset.windows[:count]
        self.batch_size = cfg.batch_size or min(self.problem.batch_size, count)
        if self.batch_size > count:
            raise ValueError(
                f"batch_size {self.batch_size} exceeds the {count} training windows"
            )
        self.epochs = cfg.epochs or self.problem.epochs
        self.warmup_fraction = cfg.warmup_fraction or self.problem.warmup_fraction
        self.steps_per_epoch = math.ceil(count / self.batch_size)
        self.total_steps = self.epochs * self.steps_per_epoch

        if dataset.validation is not None and len(dataset.validation):
            self.validation = dataset.validation.windows[: cfg.validation_count]
        else:
            logger.warning("No validation windows; validating on training windows")
            self.validation = self.windows
        if len(self.validation) == 0:
            self.validation = self.windows

        self.fcnn_hidden = list(cfg.fcnn_hidden or self.problem.fcnn_hidden)
        self.icnn_hidden = list(cfg.icnn_hidden or self.problem.icnn_hidden)
        self.model = init_model(
            jax.random.PRNGKey(cfg.seed),
            self.problem.p,
            self.problem.d,
            self.fcnn_hidden,
            self.icnn_hidden,
        )
        self.opt_state = init_optimizer(self.model, cfg)
        self.rng = np.random.default_rng(cfg.seed)
        fs, root = fsspec.core.url_to_fs(out_dir)
        fs.makedirs(root, exist_ok=True)
        self.log_path = posixpath.join(out_dir, "training_log.csv")

    def metadata(self, kind: str, epoch: int, val_loss: float | None):
        manifest = self.dataset.manifest
        return CheckpointMetadata(
            id=checkpoint_id(manifest.problem, self.cfg.seed, kind, epoch),
            problem=manifest.problem,
            kind=kind,
            p=self.problem.p,
            d=self.problem.d,
            fcnn_layers=[self.problem.p, *self.fcnn_hidden, 1],
            icnn_layers=[self.problem.p, *self.icnn_hidden, 1],
            n=list(manifest.n),
            dx=list(self.grid.dx),
            dt=self.dt,
            g=manifest.g,
            epoch=epoch,
            val_loss=val_loss,
            xi=manifest.xi,
            seed=self.cfg.seed,
            c1=self.settings.c1,
            c_d=self.settings.c_d,
            c_cfl=self.settings.c_cfl,
        )

    def _save(self, model, kind: str, epoch: int, val_loss: float | None) -> str:
        return save_checkpoint(
            model,
            self.metadata(kind, epoch, val_loss),
            posixpath.join(self.out_dir, kind),
        )

    def _run_epoch(self, epoch: int, step: int) -> tuple[float, int, float]:
        order = self.rng.permutation(len(self.windows))
        losses, lr = [], 0.0
        for start in range(0, len(order), self.batch_size):
            batch = self.windows[np.sort(order[start : start + self.batch_size])]
            lr = lr_schedule(step, self.total_steps, self.cfg, self.warmup_fraction)
            try:
                loss, grads = loss_gradient(
                    self.model, batch, epoch, self.grid, self.dt, self.settings
                )
            except NonFiniteStateError as e:
                last_good = self._save(self.model, "last_good", epoch, None)
                raise TrainingDivergedError(epoch, step, last_good) from e
            self.model, self.opt_state = adam_step(
                self.model, grads, self.opt_state, lr, self.cfg
            )
            losses.append(loss)
            step += 1
        return float(np.mean(losses)), step, lr

    def run(self) -> TrainingResult:
        logger.info(
            "Training on %s: %d windows, batch %d, %d epochs (%d steps)",
            self.dataset.manifest.problem,
            len(self.windows),
            self.batch_size,
            self.epochs,
            self.total_steps,
        )
        rows, best_val, best_path, step = [], math.inf, None, 0
        for epoch in range(1, self.epochs + 1):
            started = time.perf_counter()
            train_loss, step, lr = self._run_epoch(epoch, step)
            val_loss = recurrent_loss(
                self.model, self.validation, epoch, self.grid, self.dt, self.settings
            )
            if not math.isfinite(val_loss):
                last_good = best_path or self._save(
                    self.model, "last_good", epoch, None
                )
                raise TrainingDivergedError(epoch, step, last_good)
            if val_loss < best_val:
                best_val = val_loss
                best_path = self._save(self.model, "best", epoch, val_loss)
            seconds = time.perf_counter() - started
            rows.append([epoch, train_loss, val_loss, lr, seconds])
            history = pd.DataFrame(rows, columns=LOG_COLUMNS)
            history.to_csv(self.log_path, index=False, float_format="%.17g")
            logger.info(
                "Epoch %d/%d: train %.6e, validation %.6e, lr %.3e (%.1fs)",
                epoch,
                self.epochs,
                train_loss,
                val_loss,
                lr,
                seconds,
            )
        final_path = self._save(self.model, "final", self.epochs, rows[-1][2])
        return TrainingResult(
            best_checkpoint=best_path,
            final_checkpoint=final_path,
            log_path=self.log_path,
            best_val_loss=best_val,
            history=pd.DataFrame(rows, columns=LOG_COLUMNS),
        )


def train(dataset: TrajectoryDataset, cfg: TrainConfig, out_dir: str) -> TrainingResult:
    """Trains a model and writes best/final checkpoints plus the CSV log."""
    return Trainer(dataset, cfg, out_dir).run()
