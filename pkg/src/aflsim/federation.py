"""Client-side training and staleness-weighted aggregation primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset
from .errors import SchedulerInvariantError


@dataclass(frozen=True)
class UpdateMessage:
    """A trained client model plus the global timestamp it started from."""

    client_id: int
    w_client: np.ndarray
    trained_from: int
    dispatch_time: float = 0.0
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.arrival_time < self.dispatch_time:
            raise ValueError("arrival_time must be >= dispatch_time")
        if self.trained_from < 0:
            raise ValueError("trained_from must be >= 0")


@dataclass(frozen=True)
class ClientState:
    client_id: int
    shard: np.ndarray  # indices into the global dataset
    rng_seed: int
    local_lr: float = 0.01
    steps: int = 5
    batch_size: int = 32

    def __post_init__(self):
        if self.shard.size == 0:
            raise ValueError(f"client {self.client_id} has an empty shard")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def client_train(
    cs: ClientState,
    w: np.ndarray,
    t: int,
    arch: nn.ModelArch,
    ds: Dataset,
    lr: float | None = None,
    dispatch_time: float = 0.0,
    arrival_time: float = 0.0,
) -> UpdateMessage:
    """Run the client's local SGD steps from the snapshot ``w``.

    Each step draws a minibatch uniformly with replacement from the
    client's own shard, so shards smaller than the batch size are fine.
    The minibatch stream is derived from (rng_seed, t) only: identical
    (ClientState, w, t) always reproduce the identical message, and
    clients never share randomness.  ``w`` is not mutated.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(cs.rng_seed), int(t))))
    eta = cs.local_lr if lr is None else lr
    y = np.array(w, dtype=np.float64, copy=True)
    for _ in range(cs.steps):
        batch = cs.shard[rng.integers(0, cs.shard.size, size=cs.batch_size)]
        _, grad = nn.ce_loss_and_grad(arch, y, ds.features[batch], ds.labels[batch])
        y = nn.sgd_step(y, grad, eta)
    return UpdateMessage(
        client_id=cs.client_id,
        w_client=y,
        trained_from=int(t),
        dispatch_time=dispatch_time,
        arrival_time=arrival_time,
    )


def staleness(t_g: int, t_i: int) -> int:
    """Global-model versions elapsed since the update's snapshot."""
    if t_i > t_g:
        raise SchedulerInvariantError(f"update from the future: t_i={t_i} > t_g={t_g}")
    return t_g - t_i


def beta_weight(tau: int) -> float:
    """Staleness-decay mixing weight 1/sqrt(tau + 1)."""
    if tau < 0:
        raise ValueError(f"staleness must be >= 0, got {tau}")
    return 1.0 / np.sqrt(tau + 1.0)


def blend(w_g: np.ndarray, w_i: np.ndarray, beta: float) -> np.ndarray:
    """Convex combination (1 - beta) * w_g + beta * w_i.

    The result is clamped to the coordinatewise envelope of the inputs so
    the convexity bound holds exactly even under float rounding.
    """
    if w_g.shape != w_i.shape:
        raise ValueError(f"shape mismatch: {w_g.shape} vs {w_i.shape}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    out = (1.0 - beta) * w_g + beta * w_i
    np.clip(out, np.minimum(w_g, w_i), np.maximum(w_g, w_i), out=out)
    return out
