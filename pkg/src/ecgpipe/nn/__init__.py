"""Small numpy classifiers with handwritten gradients."""

from .model import (KINDS, ArchSpec, ModelState, backward, build, forward, loss,
                    loss_and_grad, network, param_count)
from .train import (Adam, Dataset, ReduceOnPlateau, TrainConfig, load_checkpoint, one_hot,
                    predict, save_checkpoint, train, write_history)

__all__ = [
    "KINDS", "ArchSpec", "ModelState", "backward", "build", "forward", "loss",
    "loss_and_grad", "network", "param_count", "Adam", "Dataset", "ReduceOnPlateau",
    "TrainConfig", "load_checkpoint", "one_hot", "predict", "save_checkpoint", "train",
    "write_history",
]
