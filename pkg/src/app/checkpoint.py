"""
Model checkpoints: ``<stem>.json`` metadata plus ``<stem>.f64``, a single
little-endian float64 blob with the parameters layer by layer (W row-major,
then b), potentials first in direction order, then the entropy network
(W^x, b for the first layer, W^z, W^x, b for each further layer, then W^(L),
b^(L), W_S, W_L).
"""

import json
import posixpath

import fsspec
import jax.numpy as jnp
import numpy as np
from shortuuid import ShortUUID

from app.data_models import CheckpointMetadata
from app.networks import FcnnParams, IcnnParams, SymClawModel
from app.symclaw_logger import logger


def checkpoint_id(problem: str, seed: int, kind: str, epoch: int) -> str:
    """Deterministic short id (same run, same id)."""
    return ShortUUID().uuid(name=f"symclaw/{problem}/{seed}/{kind}/{epoch}")[:12]


def flatten_model(model: SymClawModel) -> np.ndarray:
    """All parameters as one float64 vector in checkpoint order."""
    arrays = []
    for params in model.potentials:
        for w, b in zip(params.weights, params.biases, strict=True):
            arrays += [w, b]
    icnn = model.entropy
    arrays += [icnn.wx[0], icnn.b[0]]
    for wz, wx, b in zip(icnn.wz, icnn.wx[1:], icnn.b[1:], strict=True):
        arrays += [wz, wx, b]
    arrays += [icnn.w_out, icnn.b_out, icnn.w_s, icnn.w_l]
    return np.concatenate([np.asarray(a, dtype="<f8").ravel() for a in arrays])


def unflatten_model(blob: np.ndarray, meta: CheckpointMetadata) -> SymClawModel:
    """
    Rebuilds a model from a parameter blob and its recorded layer sizes.

    Raises:
        ValueError: If the blob length does not match the architecture.
    """
    offset = 0

    def take(shape):
        nonlocal offset
        size = int(np.prod(shape))
        chunk = blob[offset : offset + size]
        if chunk.size != size:
            raise ValueError("Checkpoint blob is shorter than its architecture")
        offset += size
        return jnp.asarray(chunk.reshape(shape), dtype=jnp.float64)

    potentials = []
    sizes = meta.fcnn_layers
    for _ in range(meta.d):
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:], strict=True):
            weights.append(take((n_out, n_in)))
            biases.append(take((n_out,)))
        potentials.append(FcnnParams(tuple(weights), tuple(biases)))

    hidden = meta.icnn_layers[1:-1]
    p = meta.p
    wz, wx, b = [], [take((hidden[0], p))], [take((hidden[0],))]
    for n_in, n_out in zip(hidden[:-1], hidden[1:], strict=True):
        wz.append(take((n_out, n_in)))
        wx.append(take((n_out, p)))
        b.append(take((n_out,)))
    entropy = IcnnParams(
        wz=tuple(wz),
        wx=tuple(wx),
        b=tuple(b),
        w_out=take((1, hidden[-1])),
        b_out=take((1,)),
        w_s=take((p,)),
        w_l=take((p,)),
    )
    if offset != blob.size:
        raise ValueError("Checkpoint blob is longer than its architecture")
    return SymClawModel(potentials=tuple(potentials), entropy=entropy)


def _stem(path: str) -> str:
    for suffix in (".json", ".f64"):
        if path.endswith(suffix):
            return path[: -len(suffix)]
    return path


def save_checkpoint(model: SymClawModel, meta: CheckpointMetadata, path: str) -> str:
    """
    Writes ``<stem>.json`` and ``<stem>.f64``.

    Returns:
        str: Path of the metadata document.
    """
    stem = _stem(path)
    fs, root = fsspec.core.url_to_fs(stem)
    parent = posixpath.dirname(root)
    if parent:
        fs.makedirs(parent, exist_ok=True)
    with fs.open(f"{root}.f64", "wb") as f:
        f.write(flatten_model(model).tobytes())
    with fs.open(f"{root}.json", "w") as f:
        f.write(meta.model_dump_json(indent=2))
    logger.info("Saved %s checkpoint %s (epoch %d)", meta.kind, stem, meta.epoch)
    return f"{stem}.json"


def load_checkpoint(path: str) -> tuple[SymClawModel, CheckpointMetadata]:
    """Reads a checkpoint given its stem, metadata path or blob path."""
    stem = _stem(path)
    fs, root = fsspec.core.url_to_fs(stem)
    try:
        with fs.open(f"{root}.json", "r") as f:
            meta = CheckpointMetadata(**json.load(f))
        with fs.open(f"{root}.f64", "rb") as f:
            blob = np.frombuffer(f.read(), dtype="<f8")
    except FileNotFoundError as e:
        logger.error("Checkpoint not found: %s", path)
        raise FileNotFoundError(f"Checkpoint not found: {path}") from e
    return unflatten_model(blob, meta), meta
