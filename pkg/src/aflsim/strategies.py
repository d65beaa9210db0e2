"""Server-side aggregation strategies behind one interface.

Asynchronous strategies consume one update at a time via ``on_update``;
synchronous ones take a full round of updates via ``round_sync``.  All
of them mutate a GlobalState in place and keep the discipline that the
global timestamp advances by exactly one per aggregation event.

The fedbuff and fedfa baselines are reconstructed from one-line
published descriptions and are best-effort reference implementations;
their parameters are exposed rather than hard-coded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .federation import UpdateMessage, beta_weight, blend, staleness

#: corrector(w_stale, w_global, t_g) -> corrected client parameters
Corrector = Callable[[np.ndarray, np.ndarray, int], np.ndarray]

STRATEGY_NAMES = ("fedavg", "fedavgm", "fedasync", "fedfa", "fedbuff", "fedadt")


@dataclass
class GlobalState:
    w_g: np.ndarray
    t_g: int = 0
    momentum: np.ndarray | None = None
    buffer: list[UpdateMessage] = field(default_factory=list)


@dataclass(frozen=True)
class ArrivalOutcome:
    aggregated: bool
    staleness: int
    beta: float
    corrected: bool = False


class AsyncStrategy:
    """One-update-at-a-time aggregation."""

    name = "async-base"
    synchronous = False

    def on_update(self, gs: GlobalState, msg: UpdateMessage) -> ArrivalOutcome:
        raise NotImplementedError


class FedAsync(AsyncStrategy):
    """Blend every arrival immediately, weighted by staleness decay."""

    name = "fedasync"

    def on_update(self, gs: GlobalState, msg: UpdateMessage) -> ArrivalOutcome:
        tau = staleness(gs.t_g, msg.trained_from)
        b = beta_weight(tau)
        gs.w_g = blend(gs.w_g, msg.w_client, b)
        gs.t_g += 1
        return ArrivalOutcome(True, tau, b)


class FedAdt(AsyncStrategy):
    """FedAsync plus distillation-based version correction of stale arrivals.

    Updates with staleness 0 or 1 blend directly; anything staler is first
    distilled toward the current global model.  With ``corrector=None``
    the correction is disabled and the trajectory is exactly FedAsync.
    """

    name = "fedadt"

    def __init__(self, corrector: Corrector | None):
        self.corrector = corrector

    def on_update(self, gs: GlobalState, msg: UpdateMessage) -> ArrivalOutcome:
        tau = staleness(gs.t_g, msg.trained_from)
        w_i = msg.w_client
        corrected = False
        if tau > 1 and self.corrector is not None:
            w_i = self.corrector(w_i, gs.w_g, gs.t_g)
            corrected = True
        b = beta_weight(tau)
        gs.w_g = blend(gs.w_g, w_i, b)
        gs.t_g += 1
        return ArrivalOutcome(True, tau, b, corrected)


class FedBuff(AsyncStrategy):
    """Buffer arrivals; aggregate and empty once the buffer reaches capacity."""

    name = "fedbuff"

    def __init__(self, buffer_size: int = 10):
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        self.buffer_size = buffer_size

    def on_update(self, gs: GlobalState, msg: UpdateMessage) -> ArrivalOutcome:
        tau = staleness(gs.t_g, msg.trained_from)
        gs.buffer.append(msg)
        if len(gs.buffer) < self.buffer_size:
            return ArrivalOutcome(False, tau, 0.0)
        taus = [staleness(gs.t_g, m.trained_from) for m in gs.buffer]
        b = float(np.mean([beta_weight(t) for t in taus]))
        mean_model = np.mean([m.w_client for m in gs.buffer], axis=0)
        gs.w_g = blend(gs.w_g, mean_model, b)
        gs.buffer.clear()
        gs.t_g += 1
        return ArrivalOutcome(True, tau, b)


class FedFa(AsyncStrategy):
    """Sliding-window buffer: once full, every arrival evicts the oldest
    update and aggregates the window average."""

    name = "fedfa"

    def __init__(self, buffer_size: int = 10):
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        self.buffer_size = buffer_size

    def on_update(self, gs: GlobalState, msg: UpdateMessage) -> ArrivalOutcome:
        tau = staleness(gs.t_g, msg.trained_from)
        if len(gs.buffer) == self.buffer_size:
            gs.buffer.pop(0)
        gs.buffer.append(msg)
        if len(gs.buffer) < self.buffer_size:
            return ArrivalOutcome(False, tau, 0.0)
        taus = [staleness(gs.t_g, m.trained_from) for m in gs.buffer]
        b = float(np.mean([beta_weight(t) for t in taus]))
        mean_model = np.mean([m.w_client for m in gs.buffer], axis=0)
        gs.w_g = blend(gs.w_g, mean_model, b)
        gs.t_g += 1
        return ArrivalOutcome(True, tau, b)


class SyncStrategy:
    """Whole-round aggregation; the server waits for every selected client."""

    name = "sync-base"
    synchronous = True

    def round_sync(self, gs: GlobalState, msgs: list[UpdateMessage], weights: np.ndarray) -> None:
        raise NotImplementedError

    @staticmethod
    def _weighted_mean(msgs: list[UpdateMessage], weights: np.ndarray) -> np.ndarray:
        if len(msgs) == 0:
            raise ValueError("synchronous round received no updates")
        if len(weights) != len(msgs):
            raise ValueError(f"{len(msgs)} updates but {len(weights)} weights")
        weights = np.asarray(weights, dtype=np.float64)
        stacked = np.stack([m.w_client for m in msgs])
        return (weights[:, None] * stacked).sum(axis=0) / weights.sum()


class FedAvg(SyncStrategy):
    """Shard-size-weighted average of all round participants."""

    name = "fedavg"

    def round_sync(self, gs: GlobalState, msgs: list[UpdateMessage], weights: np.ndarray) -> None:
        gs.w_g = self._weighted_mean(msgs, weights)
        gs.t_g += 1


class FedAvgM(SyncStrategy):
    """FedAvg with server momentum on the pseudo-gradient w_g - mean."""

    name = "fedavgm"

    def __init__(self, momentum: float = 0.9):
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.momentum = momentum

    def round_sync(self, gs: GlobalState, msgs: list[UpdateMessage], weights: np.ndarray) -> None:
        mean = self._weighted_mean(msgs, weights)
        delta = gs.w_g - mean
        if gs.momentum is None:
            gs.momentum = np.zeros_like(gs.w_g)
        gs.momentum = self.momentum * gs.momentum + delta
        gs.w_g = gs.w_g - gs.momentum
        gs.t_g += 1


def make_strategy(
    kind: str,
    buffer_size: int = 10,
    server_momentum: float = 0.9,
    corrector: Corrector | None = None,
) -> AsyncStrategy | SyncStrategy:
    if kind == "fedavg":
        return FedAvg()
    if kind == "fedavgm":
        return FedAvgM(server_momentum)
    if kind == "fedasync":
        return FedAsync()
    if kind == "fedadt":
        return FedAdt(corrector)
    if kind == "fedbuff":
        return FedBuff(buffer_size)
    if kind == "fedfa":
        return FedFa(buffer_size)
    raise ValueError(f"unknown strategy {kind!r}; expected one of {STRATEGY_NAMES}")
