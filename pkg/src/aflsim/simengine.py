"""Deterministic discrete-event simulator for federated training runs.

Virtual time advances only through a (time, seq)-ordered event queue.
All randomness is split into named per-client and server streams derived
from the run seed, so a (config, seed) pair fully determines every
metric the run emits, independent of host or execution order.

Asynchronous strategies are driven by client arrival events under a
concurrency floor: whenever the number of in-flight clients drops below
ceil(concurrency_rate * clients), idle clients are resampled in batches
and dispatched.  Synchronous strategies instead advance round by round,
each round lasting as long as its slowest participant.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import Dataset
from .errors import ConfigError, SchedulerInvariantError
from .federation import ClientState, client_train
from .metrics import MetricsRecord
from .strategies import AsyncStrategy, GlobalState, SyncStrategy

LATENCY_MODES = ("per_dispatch", "fixed_per_client")


@dataclass(frozen=True)
class SimConfig:
    clients: int
    concurrency_rate: float = 0.20
    resample_batch: int = 50
    latency_max: float = 5000.0
    budget: float = 1_296_000.0  # 15 days of virtual seconds
    eval_interval: int = 20
    seed: int = 0
    latency_mode: str = "per_dispatch"
    sync_fraction: float = 0.10
    max_rounds: int | None = None

    def __post_init__(self):
        if self.clients < 1:
            raise ConfigError("clients must be >= 1")
        if not 0.0 < self.concurrency_rate <= 1.0:
            raise ConfigError(f"concurrency_rate must be in (0, 1], got {self.concurrency_rate}")
        if self.resample_batch < 1:
            raise ConfigError("resample_batch must be >= 1")
        if self.latency_max <= 0:
            raise ConfigError("latency_max must be positive")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.eval_interval < 1:
            raise ConfigError("eval_interval must be >= 1")
        if self.latency_mode not in LATENCY_MODES:
            raise ConfigError(f"latency_mode must be one of {LATENCY_MODES}")
        if not 0.0 < self.sync_fraction <= 1.0:
            raise ConfigError("sync_fraction must be in (0, 1]")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise ConfigError("max_rounds must be >= 0")

    @property
    def concurrency_floor(self) -> int:
        return min(math.ceil(self.concurrency_rate * self.clients), self.clients)


@dataclass(frozen=True, order=True)
class Event:
    time: float
    seq: int
    kind: str = field(compare=False)
    client_id: int = field(compare=False, default=-1)


@dataclass(frozen=True)
class TraceEvent:
    """One processed event, for replay debugging and invariant checks."""

    time: float
    kind: str  # "dispatch" | "arrival" | "eval"
    client_id: int
    t_g: int
    staleness: int
    beta: float
    aggregated: bool = False
    corrected: bool = False
    dispatch_time: float = 0.0
    in_flight_after: int = 0

    def line(self) -> str:
        return (
            f"{self.time!r} {self.kind} {self.client_id} {self.t_g} "
            f"{self.staleness} {self.beta!r}"
        )


@dataclass
class _Flight:
    w_snapshot: np.ndarray
    trained_from: int
    lr: float
    dispatch_time: float
    arrival_time: float


def _derive_seed(*parts: int) -> int:
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


class Simulator:
    """One simulation run: strategy, data partition, and virtual clock."""

    def __init__(
        self,
        cfg: SimConfig,
        arch: nn.ModelArch,
        ds: Dataset,
        shards: tuple[np.ndarray, ...],
        test_x: np.ndarray,
        test_y: np.ndarray,
        strategy: AsyncStrategy | SyncStrategy,
        lr: float = 0.01,
        lr_decay: float = 0.9999,
        batch_size: int = 32,
        local_steps: int = 5,
        correction_cost: float = 0.0,
        initial_params: np.ndarray | None = None,
        collect_trace: bool = False,
    ):
        if len(shards) != cfg.clients:
            raise ConfigError(f"{len(shards)} shards for {cfg.clients} clients")
        if test_x.shape[0] == 0:
            raise ConfigError("test set is empty")
        if lr <= 0 or not 0.0 < lr_decay <= 1.0:
            raise ConfigError("need lr > 0 and lr_decay in (0, 1]")

        self.cfg = cfg
        self.arch = arch
        self.ds = ds
        self.strategy = strategy
        self.test_x = test_x
        self.test_y = test_y
        self.lr0 = lr
        self.lr_decay = lr_decay
        self.correction_cost = correction_cost
        self.collect_trace = collect_trace

        self.clientstates = [
            ClientState(
                client_id=cid,
                shard=shard,
                rng_seed=_derive_seed(cfg.seed, 1, cid),
                local_lr=lr,
                steps=local_steps,
                batch_size=batch_size,
            )
            for cid, shard in enumerate(shards)
        ]
        self._latency_rngs = [
            np.random.default_rng(np.random.SeedSequence((cfg.seed, 2, cid)))
            for cid in range(cfg.clients)
        ]
        self._server_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3)))
        if cfg.latency_mode == "fixed_per_client":
            self._fixed_latency = [
                float(self._latency_rngs[cid].uniform(0.0, cfg.latency_max))
                for cid in range(cfg.clients)
            ]
        else:
            self._fixed_latency = None

        if initial_params is None:
            initial_params = nn.init_params(arch, _derive_seed(cfg.seed, 0))
        self.gs = GlobalState(w_g=np.array(initial_params, dtype=np.float64, copy=True))

        self.clock = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self._flights: dict[int, _Flight] = {}
        self.records: list[MetricsRecord] = []
        self.trace: list[TraceEvent] = []
        self._window_taus: list[int] = []
        self._corrections = 0

    # ------------------------------------------------------------------
    # scheduling primitives
    # ------------------------------------------------------------------
    def _sample_latency(self, client_id: int) -> float:
        if self._fixed_latency is not None:
            return self._fixed_latency[client_id]
        return float(self._latency_rngs[client_id].uniform(0.0, self.cfg.latency_max))

    def _current_lr(self) -> float:
        return self.lr0 * self.lr_decay**self.gs.t_g

    def dispatch(self, client_id: int) -> Event:
        """Snapshot the global model for a client and schedule its arrival."""
        if client_id in self._flights:
            raise SchedulerInvariantError(f"client {client_id} is already in flight")
        latency = self._sample_latency(client_id)
        arrival = self.clock + latency
        self._flights[client_id] = _Flight(
            w_snapshot=self.gs.w_g.copy(),
            trained_from=self.gs.t_g,
            lr=self._current_lr(),
            dispatch_time=self.clock,
            arrival_time=arrival,
        )
        ev = Event(time=arrival, seq=self._seq, kind="arrival", client_id=client_id)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        if self.collect_trace:
            self.trace.append(
                TraceEvent(
                    time=self.clock,
                    kind="dispatch",
                    client_id=client_id,
                    t_g=self.gs.t_g,
                    staleness=0,
                    beta=0.0,
                    dispatch_time=self.clock,
                    in_flight_after=len(self._flights),
                )
            )
        return ev

    def enforce_concurrency(self) -> None:
        """Dispatch idle clients in resample batches until the floor holds."""
        floor = self.cfg.concurrency_floor
        while len(self._flights) < floor:
            idle = sorted(set(range(self.cfg.clients)) - set(self._flights))
            if not idle:
                break
            k = min(self.cfg.resample_batch, len(idle))
            chosen = self._server_rng.choice(len(idle), size=k, replace=False)
            for pos in sorted(chosen.tolist()):
                self.dispatch(idle[pos])

    # ------------------------------------------------------------------
    # evaluation / records
    # ------------------------------------------------------------------
    def _append_record(self) -> None:
        acc, loss = nn.evaluate(self.arch, self.gs.w_g, self.test_x, self.test_y)
        taus = self._window_taus
        rec = MetricsRecord(
            virtual_time=self.clock,
            round=self.gs.t_g,
            test_accuracy=acc,
            test_loss=loss,
            mean_staleness=float(np.mean(taus)) if taus else 0.0,
            max_staleness=max(taus) if taus else 0,
            corrections_applied=self._corrections,
        )
        # keep virtual_time strictly increasing: an evaluation at the same
        # instant supersedes the previous one
        if self.records and self.records[-1].virtual_time == rec.virtual_time:
            self.records[-1] = rec
        else:
            self.records.append(rec)
        self._window_taus = []
        if self.collect_trace:
            self.trace.append(
                TraceEvent(
                    time=self.clock,
                    kind="eval",
                    client_id=-1,
                    t_g=self.gs.t_g,
                    staleness=0,
                    beta=0.0,
                )
            )

    def _after_aggregation(self) -> None:
        if self.gs.t_g % self.cfg.eval_interval == 0:
            self._append_record()

    # ------------------------------------------------------------------
    # event processing
    # ------------------------------------------------------------------
    def step(self) -> Event:
        """Process the earliest pending event and return it."""
        if not self._heap:
            raise RuntimeError("event queue is empty; simulation was not seeded")
        ev = heapq.heappop(self._heap)
        # a nonzero correction cost can push the clock past queued events;
        # the clock never runs backward
        self.clock = max(self.clock, ev.time)
        flight = self._flights.pop(ev.client_id)
        msg = client_train(
            self.clientstates[ev.client_id],
            flight.w_snapshot,
            flight.trained_from,
            self.arch,
            self.ds,
            lr=flight.lr,
            dispatch_time=flight.dispatch_time,
            arrival_time=flight.arrival_time,
        )
        outcome = self.strategy.on_update(self.gs, msg)
        self._window_taus.append(outcome.staleness)
        if outcome.corrected:
            self._corrections += 1
            self.clock += self.correction_cost
        if outcome.aggregated:
            self._after_aggregation()
        self.enforce_concurrency()
        if self.collect_trace:
            self.trace.append(
                TraceEvent(
                    time=ev.time,
                    kind="arrival",
                    client_id=ev.client_id,
                    t_g=self.gs.t_g,
                    staleness=outcome.staleness,
                    beta=float(outcome.beta),
                    aggregated=outcome.aggregated,
                    corrected=outcome.corrected,
                    dispatch_time=flight.dispatch_time,
                    in_flight_after=len(self._flights),
                )
            )
        return ev

    def _run_async(self) -> None:
        self.enforce_concurrency()
        while self._heap:
            if self._heap[0].time > self.cfg.budget:
                break
            if self.cfg.max_rounds is not None and self.gs.t_g >= self.cfg.max_rounds:
                break
            self.step()

    def _run_sync(self) -> None:
        m = self.cfg.clients
        n_sel = max(1, int(round(self.cfg.sync_fraction * m)))
        weights = np.array([cs.shard.size for cs in self.clientstates], dtype=np.float64)
        while True:
            if self.cfg.max_rounds is not None and self.gs.t_g >= self.cfg.max_rounds:
                break
            selected = sorted(self._server_rng.choice(m, size=n_sel, replace=False).tolist())
            latencies = [self._sample_latency(cid) for cid in selected]
            duration = max(latencies)
            if self.clock + duration > self.cfg.budget:
                break
            lr_t = self._current_lr()
            msgs = [
                client_train(
                    self.clientstates[cid],
                    self.gs.w_g,
                    self.gs.t_g,
                    self.arch,
                    self.ds,
                    lr=lr_t,
                    dispatch_time=self.clock,
                    arrival_time=self.clock + lat,
                )
                for cid, lat in zip(selected, latencies)
            ]
            round_start = self.clock
            self.clock += duration
            self.strategy.round_sync(self.gs, msgs, weights[selected])
            self._window_taus.extend([0] * len(selected))
            if self.collect_trace:
                for msg in msgs:
                    self.trace.append(
                        TraceEvent(
                            time=msg.arrival_time,
                            kind="arrival",
                            client_id=msg.client_id,
                            t_g=self.gs.t_g,
                            staleness=0,
                            beta=0.0,
                            aggregated=True,
                            dispatch_time=round_start,
                        )
                    )
            self._after_aggregation()

    def run(self) -> list[MetricsRecord]:
        """Simulate until the virtual budget (or round cap) and return the log."""
        if self.records:
            raise RuntimeError("run() may only be called once per Simulator")
        self._append_record()  # initial evaluation at time 0
        if isinstance(self.strategy, SyncStrategy) or getattr(self.strategy, "synchronous", False):
            self._run_sync()
        else:
            self._run_async()
        if self.records[-1].round != self.gs.t_g:
            self._append_record()
        return self.records


def dump_trace(trace: list[TraceEvent], path: str) -> None:
    """Write the documented one-line-per-event trace file."""
    with open(path, "w") as f:
        f.write("# time kind client_id t_g staleness beta\n")
        for ev in trace:
            f.write(ev.line() + "\n")
