"""Convolutional autoencoder with symmetric shortcut connections.

Everything is hand-rolled on top of the kernels module: layers carry
their own parameters and reverse-mode gradients, the model wires the
fixed two-stage encoder-decoder shape, and the trainer is a deterministic
adaptive-moment loop. Reconstruction loss doubles as the anomaly score
further up the pipeline.
"""

from .layers import Conv, MaxPool, Relu, Upsample
from .model import Autoencoder, load_model, reconstruction_loss, save_model
from .train import TrainConfig, TrainResult, sample_losses, train

__all__ = [
    "Autoencoder",
    "Conv",
    "MaxPool",
    "Relu",
    "TrainConfig",
    "TrainResult",
    "Upsample",
    "load_model",
    "reconstruction_loss",
    "sample_losses",
    "save_model",
    "train",
]
