"""Mini-batch Adam training with reduce-on-plateau and early stopping."""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DomainError, FormatError, TrainingError
from .model import ArchSpec, ModelState, forward, loss_and_grad, network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr_initial: float = 1e-3
    lr_floor: float = 1.6e-6
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    batch_size: int = 50
    max_epochs: int = 50
    early_stopping_patience: Optional[int] = 3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.lr_floor < self.lr_initial:
            raise DomainError("lr_floor must be below lr_initial")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")
        if not 0 < self.plateau_factor < 1:
            raise DomainError("plateau_factor must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass
class Dataset:
    """Network inputs with one-hot labels and optional auxiliary features."""

    x: np.ndarray
    y: np.ndarray
    aux: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if len(self.x) == 0:
            raise DomainError("dataset is empty")
        if self.y.shape[0] != self.x.shape[0]:
            raise DomainError("inputs and labels differ in count")
        if not np.allclose(self.y.sum(axis=1), 1.0) or not np.all((self.y == 0) | (self.y == 1)):
            raise DomainError("labels must be one-hot")
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=np.float64)

    def __len__(self):
        return len(self.x)

    def take(self, idx):
        return Dataset(self.x[idx], self.y[idx], None if self.aux is None else self.aux[idx])


def one_hot(indices, n_classes=5):
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros((len(indices), n_classes))
    out[np.arange(len(indices)), indices] = 1.0
    return out


class Adam:
    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, state, grad, lr):
        state.adam_t += 1
        t = state.adam_t
        state.adam_m *= self.beta1
        state.adam_m += (1 - self.beta1) * grad
        state.adam_v *= self.beta2
        state.adam_v += (1 - self.beta2) * grad * grad
        m_hat = state.adam_m / (1 - self.beta1 ** t)
        v_hat = state.adam_v / (1 - self.beta2 ** t)
        state.params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class ReduceOnPlateau:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs
    without a new best validation loss; never go below ``floor``."""

    def __init__(self, lr, factor=0.5, patience=5, floor=1.6e-6):
        self.lr, self.factor, self.patience, self.floor = lr, factor, patience, floor
        self.best = math.inf
        self.wait = 0

    def update(self, val_loss):
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.floor)
                self.wait = 0
        return self.lr


def _accuracy(probs, onehot):
    return float(np.mean(np.argmax(probs, axis=1) == np.argmax(onehot, axis=1)))


def evaluate_loss(state, data, batch_size=256):
    """Mean loss and accuracy over ``data`` without touching the parameters."""
    total_loss, correct = 0.0, 0
    for start in range(0, len(data), batch_size):
        part = data.take(slice(start, start + batch_size))
        probs = forward(state, part.x, part.aux)
        p = np.clip(np.sum(probs * part.y, axis=1), 1e-300, None)
        total_loss += float(-np.log(p).sum())
        correct += int(np.sum(np.argmax(probs, axis=1) == np.argmax(part.y, axis=1)))
    return total_loss / len(data), correct / len(data)


def train(state, train_data, val_data, cfg=None):
    """Train ``state`` in place and return (best state, history).

    The returned state carries the parameters of the epoch with the lowest
    validation loss. ``history`` is a list of per-epoch dicts.
    """
    cfg = cfg or TrainConfig()
    adam = Adam(cfg.beta1, cfg.beta2, cfg.eps)
    lr = state.lr if state.lr is not None else cfg.lr_initial
    schedule = ReduceOnPlateau(lr, cfg.plateau_factor, cfg.plateau_patience, cfg.lr_floor)
    best = state.copy()
    best_loss = state.best_val_loss
    es_wait = 0
    history = []
    n = len(train_data)

    for _ in range(cfg.max_epochs):
        epoch = state.epoch + 1
        order = np.random.Generator(
            np.random.PCG64([cfg.seed & (2**64 - 1), epoch])).permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            batch = train_data.take(order[start:start + cfg.batch_size])
            loss, grad, probs = loss_and_grad(state, batch.x, batch.y, batch.aux)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            adam.step(state, grad, schedule.lr)
            if not np.all(np.isfinite(state.params)):
                raise TrainingError(f"non-finite parameters at epoch {epoch}", epoch=epoch)
            loss_sum += loss * len(batch)
            correct += int(np.sum(np.argmax(probs, axis=1) == np.argmax(batch.y, axis=1)))
        state.epoch = epoch
        val_loss, val_acc = evaluate_loss(state, val_data)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        record = {
            "epoch": epoch,
            "lr": schedule.lr,
            "train_loss": loss_sum / n,
            "val_loss": val_loss,
            "train_acc": correct / n,
            "val_acc": val_acc,
        }
        history.append(record)
        log.info("epoch %d lr %.3g train %.4f/%.3f val %.4f/%.3f", epoch, schedule.lr,
                 record["train_loss"], record["train_acc"], val_loss, val_acc)

        if val_loss < best_loss:
            best_loss = val_loss
            es_wait = 0
            state.best_val_loss = val_loss
            best = state.copy()
        else:
            es_wait += 1
        state.lr = schedule.update(val_loss)
        if cfg.early_stopping_patience is not None and es_wait >= cfg.early_stopping_patience:
            log.info("early stopping after epoch %d", epoch)
            break

    best.lr = state.lr
    best.meta["epochs_run"] = state.epoch
    return best, history


def predict(state, x, aux=None, batch_size=256):
    """Predicted class indices (ties go to the lowest index) and probabilities."""
    x = np.asarray(x, dtype=np.float64)
    probs = np.concatenate([
        forward(state, x[s:s + batch_size], None if aux is None else aux[s:s + batch_size])
        for s in range(0, len(x), batch_size)
    ]) if len(x) else np.empty((0, state.arch.n_classes))
    return np.argmax(probs, axis=1), probs


HISTORY_FIELDS = ("epoch", "lr", "train_loss", "val_loss", "train_acc", "val_acc")


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def _ckpt_paths(path):
    path = Path(path)
    if path.suffix in (".json", ".params"):
        path = path.with_suffix("")
    return path.with_name(path.name + ".json"), path.with_name(path.name + ".params")


def save_checkpoint(state, path, cfg=None, metrics=None, extra=None):
    """JSON metadata next to a raw little-endian float64 parameter blob."""
    meta_path, blob_path = _ckpt_paths(path)
    meta = {
        "arch": state.arch.to_dict(),
        "seed": state.seed,
        "epoch": state.epoch,
        "best_val_loss": None if not math.isfinite(state.best_val_loss) else state.best_val_loss,
        "lr": state.lr,
        "n_params": int(state.n_params),
        "train_config": None if cfg is None else cfg.to_dict(),
        "metrics": metrics,
    }
    meta.update(state.meta)
    if extra:
        meta.update(extra)
    blob_path.write_bytes(state.params.astype("<f8").tobytes())
    meta_path.write_text(json.dumps(meta, indent=2, default=_jsonable) + "\n")
    return meta_path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def load_checkpoint(path):
    meta_path, blob_path = _ckpt_paths(path)
    try:
        meta = json.loads(meta_path.read_text())
        arch = ArchSpec.from_dict(meta["arch"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{meta_path}: malformed checkpoint ({exc})") from exc
    params = np.frombuffer(blob_path.read_bytes(), dtype="<f8").astype(np.float64)
    expected = network(arch).n_params
    if params.size != expected:
        raise FormatError(f"{blob_path}: {params.size} parameters, architecture needs {expected}")
    best = meta.get("best_val_loss")
    known = {"arch", "seed", "epoch", "best_val_loss", "lr", "n_params"}
    state = ModelState(
        arch=arch, params=params, seed=int(meta.get("seed", 0)),
        adam_m=np.zeros_like(params), adam_v=np.zeros_like(params),
        epoch=int(meta.get("epoch", 0)),
        best_val_loss=math.inf if best is None else float(best),
        lr=meta.get("lr"),
        meta={k: v for k, v in meta.items() if k not in known},
    )
    return state
