"""Deterministic virtual-time simulator for asynchronous federated learning."""

from .data import Dataset, PartitionSpec, dirichlet_partition, load_idx, synth_blobs
from .distill import DistillConfig, adaptive_alpha, correct, kd_loss
from .federation import ClientState, UpdateMessage, beta_weight, blend, client_train, staleness
from .metrics import MetricsRecord, read_metrics_csv, time_to_target, write_metrics_csv
from .nn import ModelArch, cross_entropy, evaluate, forward, init_params, kl_div, sgd_step, softmax_T
from .simengine import SimConfig, Simulator
from .strategies import GlobalState, make_strategy

__version__ = "0.1.0"

__all__ = [
    "ClientState",
    "Dataset",
    "DistillConfig",
    "GlobalState",
    "MetricsRecord",
    "ModelArch",
    "PartitionSpec",
    "SimConfig",
    "Simulator",
    "UpdateMessage",
    "adaptive_alpha",
    "beta_weight",
    "blend",
    "client_train",
    "correct",
    "cross_entropy",
    "dirichlet_partition",
    "evaluate",
    "forward",
    "init_params",
    "kd_loss",
    "kl_div",
    "load_idx",
    "make_strategy",
    "read_metrics_csv",
    "sgd_step",
    "softmax_T",
    "staleness",
    "synth_blobs",
    "time_to_target",
    "write_metrics_csv",
]
