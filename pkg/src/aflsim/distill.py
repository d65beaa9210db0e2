"""Version correction of stale client models by knowledge distillation.

A stale client model (student) is trained briefly against the latest
global model (teacher) on the small server-held distillation set.  The
loss mixes a temperature-scaled KL term toward the teacher's softened
outputs with plain cross-entropy on the ground-truth labels; the mixing
weight ramps linearly over the warm-up rounds so an immature global
model cannot mislead students early in training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn


@dataclass(frozen=True)
class DistillConfig:
    temperature: float = 3.0
    alpha_min: float = 0.2
    alpha_max: float = 0.6
    warmup_rounds: int = 1000
    distill_epochs: int = 1
    distill_lr: float = 0.01  # defaults to the client learning rate
    distill_batch: int = 32
    # multiply the KL term by temperature**2 (off: literal loss definition)
    squared_temperature_scale: bool = False
    # virtual seconds charged to the clock per correction (0: free server work)
    correction_cost: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
            raise ValueError("need 0 <= alpha_min <= alpha_max <= 1")
        if self.warmup_rounds < 1 or self.distill_epochs < 1 or self.distill_batch < 1:
            raise ValueError("warmup_rounds, distill_epochs, distill_batch must be >= 1")
        if self.distill_lr < 0:
            raise ValueError("distill_lr must be >= 0")


def adaptive_alpha(t: int, cfg: DistillConfig) -> float:
    """Distillation weight at global round t: linear ramp, then flat."""
    if t < 0:
        raise ValueError(f"round must be >= 0, got {t}")
    ramp = min(1.0, t / cfg.warmup_rounds)
    return cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * ramp


def kd_loss(
    z_teacher: np.ndarray,
    z_student: np.ndarray,
    label: int,
    alpha: float,
    temperature: float,
    squared_temperature_scale: bool = False,
) -> tuple[float, np.ndarray]:
    """Distillation loss for one sample and its gradient w.r.t. the student logits.

    loss = alpha * KL(softmax(z_teacher/T) || softmax(z_student/T))
         + (1 - alpha) * cross_entropy(z_student, label)

    Teacher logits are constants; no gradient flows to them.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    p = nn.softmax_T(z_teacher, temperature)
    q = nn.softmax_T(z_student, temperature)
    kl_scale = temperature * temperature if squared_temperature_scale else 1.0
    ce, ce_grad = nn.cross_entropy(z_student, label)
    loss = alpha * kl_scale * nn.kl_div(p, q) + (1.0 - alpha) * ce
    grad = alpha * kl_scale * (q - p) / temperature + (1.0 - alpha) * ce_grad
    return loss, grad


def _kd_batch_grad(
    arch: nn.ModelArch,
    w_student: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    teacher_logits: np.ndarray,
    alpha: float,
    cfg: DistillConfig,
) -> np.ndarray:
    """Flat parameter gradient of the mean kd_loss over a minibatch."""
    logits = nn.forward_batch(arch, w_student, x)
    p = nn.softmax_T(teacher_logits, cfg.temperature)
    q = nn.softmax_T(logits, cfg.temperature)
    kl_scale = cfg.temperature**2 if cfg.squared_temperature_scale else 1.0
    probs = nn.softmax_T(logits)
    hard = probs
    hard[np.arange(x.shape[0]), y] -= 1.0
    dlogits = alpha * kl_scale * (q - p) / cfg.temperature + (1.0 - alpha) * hard
    dlogits /= x.shape[0]
    return nn.grad_from_dlogits(arch, w_student, x, dlogits)


def correction_step_count(n_samples: int, cfg: DistillConfig) -> int:
    """Minibatch gradient steps one correction costs."""
    return cfg.distill_epochs * math.ceil(n_samples / cfg.distill_batch)


def correct(
    w_stale: np.ndarray,
    w_global: np.ndarray,
    t_g: int,
    distill_x: np.ndarray,
    distill_y: np.ndarray,
    arch: nn.ModelArch,
    cfg: DistillConfig,
) -> np.ndarray:
    """Distill the stale model toward the current global model.

    Runs ``distill_epochs`` passes over the distillation set in fixed
    sequential minibatch order with the teacher (arch, w_global) frozen;
    teacher logits are computed once up front.  Returns the corrected
    student; neither input vector is mutated.
    """
    if distill_x.shape[0] == 0:
        raise ValueError("distillation set is empty")
    alpha = adaptive_alpha(t_g, cfg)
    teacher_logits = nn.forward_batch(arch, w_global, distill_x)
    y = np.array(w_stale, dtype=np.float64, copy=True)
    n = distill_x.shape[0]
    for _ in range(cfg.distill_epochs):
        for start in range(0, n, cfg.distill_batch):
            stop = min(start + cfg.distill_batch, n)
            grad = _kd_batch_grad(
                arch,
                y,
                distill_x[start:stop],
                distill_y[start:stop],
                teacher_logits[start:stop],
                alpha,
                cfg,
            )
            y = nn.sgd_step(y, grad, cfg.distill_lr)
    return y
