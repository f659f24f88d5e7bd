"""Deterministic adaptive-moment trainer for the autoencoder.

The sample order is canonicalized by content hash before the seeded
shuffle, so the trained model depends on the seed and the data but not on
the order the caller happened to collect the samples in. The returned
model state is the epoch-best by mean training loss; a loss exceeding ten
times the first epoch's (or turning non-finite) aborts the loop with the
diverged flag set and still restores the best state seen.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .model import Autoencoder, reconstruction_loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise DomainError("epochs and batch size must be positive")
        if self.learning_rate <= 0.0 or self.eps <= 0.0:
            raise DomainError("learning rate and eps must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise DomainError("moment decays must lie in [0, 1)")


@dataclass
class TrainResult:
    loss_curve: np.ndarray
    best_epoch: int
    best_loss: float
    diverged: bool


def sample_losses(model: Autoencoder, dataset) -> np.ndarray:
    """Reconstruction loss of every sample, in the given order."""
    return np.array([model.sample_loss(np.asarray(x, dtype=np.float64)) for x in dataset])


def train(model: Autoencoder, dataset, cfg: TrainConfig | None = None) -> TrainResult:
    if cfg is None:
        cfg = TrainConfig()
    data = [np.ascontiguousarray(x, dtype=np.float64) for x in dataset]
    if not data:
        raise DomainError("cannot train on an empty dataset")
    for x in data:
        if x.shape != model.input_shape:
            raise DomainError(
                f"sample shape {x.shape} does not match the model's {model.input_shape}"
            )
    data.sort(key=lambda x: hashlib.sha256(x.tobytes()).digest())

    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    moment1 = [np.zeros_like(p) for p, _ in params]
    moment2 = [np.zeros_like(p) for p, _ in params]
    step = 0

    curve: list[float] = []
    best_loss = np.inf
    best_epoch = -1
    best_state = model.state_arrays()
    diverged = False

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            model.zero_grads()
            for i in batch:
                xbar = model.forward(data[i])
                losses.append(reconstruction_loss(data[i], xbar))
                model.backward(data[i], xbar)
            step += 1
            scale = 1.0 / len(batch)
            bias1 = 1.0 - cfg.beta1**step
            bias2 = 1.0 - cfg.beta2**step
            for (param, grad), m1, m2 in zip(params, moment1, moment2):
                g = grad * scale
                m1 *= cfg.beta1
                m1 += (1.0 - cfg.beta1) * g
                m2 *= cfg.beta2
                m2 += (1.0 - cfg.beta2) * g * g
                param -= cfg.learning_rate * (m1 / bias1) / (
                    np.sqrt(m2 / bias2) + cfg.eps
                )
        epoch_loss = float(np.mean(losses))
        curve.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_epoch = epoch
            best_state = model.state_arrays()
        if not np.isfinite(epoch_loss) or epoch_loss > 10.0 * curve[0]:
            diverged = True
            break

    model.load_state_arrays(best_state)
    return TrainResult(
        loss_curve=np.array(curve),
        best_epoch=best_epoch,
        best_loss=best_loss,
        diverged=diverged,
    )
