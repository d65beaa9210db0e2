"""Run configuration: flat key = value files and experiment orchestration.

A run config is a plain-text file of ``key = value`` lines (# comments
allowed) whose keys mirror RunConfig field names.  CLI flags override
file values.  ``run_experiment`` wires dataset -> partition -> simulator
and returns the metrics log.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from .data import Dataset, dirichlet_partition, load_idx, synth_blobs
from .distill import DistillConfig, correct
from .errors import ConfigError
from .nn import ModelArch
from .simengine import SimConfig, Simulator, TraceEvent
from .strategies import STRATEGY_NAMES, make_strategy


@dataclass
class RunConfig:
    # dataset: synthetic blobs or an IDX file pair
    dataset: str = "synthetic"
    synthetic_classes: int = 5
    synthetic_per_class: int = 2000
    synthetic_dim: int = 16
    synthetic_spread: float = 0.3
    idx_train_images: str = ""
    idx_train_labels: str = ""
    idx_test_images: str = ""
    idx_test_labels: str = ""
    # model
    hidden_layers: tuple[int, ...] = (32,)
    activation: str = "relu"
    # partition
    clients: int = 50
    dirichlet_alpha: float = 0.1
    distill_frac: float = 0.005
    test_frac: float | None = None  # default: 0.2 synthetic, 0 with official IDX test files
    partition_seed: int | None = None  # default: seed
    # simulation
    seed: int = 0
    concurrency_rate: float = 0.20
    resample_batch: int = 50
    latency_max: float = 5000.0
    budget: float = 1_296_000.0
    eval_interval: int = 20
    latency_mode: str = "per_dispatch"
    sync_fraction: float = 0.10
    max_rounds: int | None = None
    # strategy
    strategy: str = "fedadt"
    buffer_size: int = 10
    server_momentum: float = 0.9
    # client training
    lr: float = 0.01
    lr_decay: float = 0.9999
    batch_size: int = 32
    local_steps: int = 5
    # distillation (fedadt)
    distill_enabled: bool = True
    distill_temperature: float = 3.0
    distill_alpha_min: float = 0.2
    distill_alpha_max: float = 0.6
    distill_warmup_rounds: int = 1000
    distill_epochs: int = 1
    distill_lr: float = 0.01
    distill_batch: int = 32
    distill_squared_temperature: bool = False
    correction_cost: float = 0.0
    # outputs
    out: str = "metrics.csv"
    trace: str = ""


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    if name == "hidden_layers":
        raw = raw.strip()
        return tuple(int(p) for p in raw.split(",") if p.strip()) if raw else ()
    if name in ("test_frac",):
        return None if raw.lower() in ("", "none") else float(raw)
    if name in ("partition_seed", "max_rounds"):
        return None if raw.lower() in ("", "none") else int(raw)
    if name in ("distill_enabled", "distill_squared_temperature"):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    ftype = _FIELDS[name].type
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw.strip())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=path)


def validate_config(cfg: RunConfig) -> None:
    if cfg.dataset not in ("synthetic", "idx"):
        raise ConfigError(f"dataset must be 'synthetic' or 'idx', got {cfg.dataset!r}")
    if cfg.strategy not in STRATEGY_NAMES:
        raise ConfigError(f"strategy must be one of {STRATEGY_NAMES}, got {cfg.strategy!r}")
    if cfg.dataset == "idx":
        for key in ("idx_train_images", "idx_train_labels"):
            path = getattr(cfg, key)
            if not path:
                raise ConfigError(f"{key} is required for dataset = idx")
            if not os.path.exists(path):
                raise ConfigError(f"{key}: no such file: {path}")
        for key in ("idx_test_images", "idx_test_labels"):
            path = getattr(cfg, key)
            if path and not os.path.exists(path):
                raise ConfigError(f"{key}: no such file: {path}")
        if bool(cfg.idx_test_images) != bool(cfg.idx_test_labels):
            raise ConfigError("idx_test_images and idx_test_labels must be given together")


def _effective_test_frac(cfg: RunConfig, has_official_test: bool) -> float:
    if cfg.test_frac is not None:
        return cfg.test_frac
    if cfg.dataset == "idx" and has_official_test:
        return 0.0
    return 0.2


def build_dataset(cfg: RunConfig) -> tuple[Dataset, Dataset | None]:
    """Training dataset plus the official test dataset, if one exists."""
    if cfg.dataset == "synthetic":
        ds = synth_blobs(
            cfg.synthetic_classes,
            cfg.synthetic_per_class,
            cfg.synthetic_dim,
            seed=cfg.partition_seed if cfg.partition_seed is not None else cfg.seed,
            spread=cfg.synthetic_spread,
        )
        return ds, None
    train = load_idx(cfg.idx_train_images, cfg.idx_train_labels)
    test = None
    if cfg.idx_test_images:
        test = load_idx(cfg.idx_test_images, cfg.idx_test_labels)
        if test.class_count > train.class_count:
            raise ConfigError("test set contains labels unseen in the training set")
    return train, test


def run_experiment(cfg: RunConfig) -> tuple[list, list[TraceEvent]]:
    """Execute one configured run; returns (metrics records, event trace)."""
    validate_config(cfg)
    ds, official_test = build_dataset(cfg)
    pseed = cfg.partition_seed if cfg.partition_seed is not None else cfg.seed
    part = dirichlet_partition(
        ds,
        cfg.clients,
        cfg.dirichlet_alpha,
        distill_frac=cfg.distill_frac,
        test_frac=_effective_test_frac(cfg, official_test is not None),
        seed=pseed,
    )
    if official_test is not None:
        test_x, test_y = official_test.features, official_test.labels
    else:
        if part.test_indices.size == 0:
            raise ConfigError("no test data: set test_frac > 0 or provide IDX test files")
        test_x, test_y = ds.features[part.test_indices], ds.labels[part.test_indices]

    arch = ModelArch(
        (ds.features.shape[1], *cfg.hidden_layers, ds.class_count),
        activation=cfg.activation,
    )

    corrector = None
    dcfg = DistillConfig(
        temperature=cfg.distill_temperature,
        alpha_min=cfg.distill_alpha_min,
        alpha_max=cfg.distill_alpha_max,
        warmup_rounds=cfg.distill_warmup_rounds,
        distill_epochs=cfg.distill_epochs,
        distill_lr=cfg.distill_lr,
        distill_batch=cfg.distill_batch,
        squared_temperature_scale=cfg.distill_squared_temperature,
        correction_cost=cfg.correction_cost,
    )
    if cfg.strategy == "fedadt" and cfg.distill_enabled:
        if part.distill_indices.size == 0:
            raise ConfigError(
                "fedadt needs a nonempty distillation set; increase distill_frac or the dataset size"
            )
        dx = ds.features[part.distill_indices]
        dy = ds.labels[part.distill_indices]

        def corrector(w_stale: np.ndarray, w_g: np.ndarray, t_g: int) -> np.ndarray:
            return correct(w_stale, w_g, t_g, dx, dy, arch, dcfg)

    strategy = make_strategy(
        cfg.strategy,
        buffer_size=cfg.buffer_size,
        server_momentum=cfg.server_momentum,
        corrector=corrector,
    )
    sim = Simulator(
        SimConfig(
            clients=cfg.clients,
            concurrency_rate=cfg.concurrency_rate,
            resample_batch=cfg.resample_batch,
            latency_max=cfg.latency_max,
            budget=cfg.budget,
            eval_interval=cfg.eval_interval,
            seed=cfg.seed,
            latency_mode=cfg.latency_mode,
            sync_fraction=cfg.sync_fraction,
            max_rounds=cfg.max_rounds,
        ),
        arch,
        ds,
        part.client_shards,
        test_x,
        test_y,
        strategy,
        lr=cfg.lr,
        lr_decay=cfg.lr_decay,
        batch_size=cfg.batch_size,
        local_steps=cfg.local_steps,
        correction_cost=dcfg.correction_cost,
        collect_trace=bool(cfg.trace),
    )
    records = sim.run()
    return records, sim.trace
