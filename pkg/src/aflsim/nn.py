"""Minimal dense-network training core on flat parameter vectors.

The whole model lives in a single 1-D float64 array so that server-side
aggregation is one elementwise blend.  Gradients are computed manually
(no autodiff); every public function is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelArch:
    """Layer widths of a fully-connected classifier.

    ``layer_sizes`` runs input dim, hidden dims, output dim (= class
    count).  Hidden layers use ``activation``; the output layer is linear
    and produces logits.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    _offsets: tuple[tuple[int, int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output dims")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)
        # per layer: (weight offset, bias offset, end) into the flat vector
        offsets = []
        pos = 0
        for nin, nout in zip(sizes[:-1], sizes[1:]):
            offsets.append((pos, pos + nin * nout, pos + nin * nout + nout))
            pos += nin * nout + nout
        object.__setattr__(self, "_offsets", tuple(offsets))

    @property
    def param_count(self) -> int:
        return self._offsets[-1][2]

    @property
    def class_count(self) -> int:
        return self.layer_sizes[-1]

    def unpack(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of ``w`` as per-layer (weight matrix, bias) pairs."""
        w = self._check_params(w)
        out = []
        for (w0, b0, end), nin, nout in zip(self._offsets, self.layer_sizes[:-1], self.layer_sizes[1:]):
            out.append((w[w0:b0].reshape(nin, nout), w[b0:end]))
        return out

    def _check_params(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != self.param_count:
            raise ValueError(
                f"parameter vector has length {w.shape}, arch needs {self.param_count}"
            )
        return w


def init_params(arch: ModelArch, seed: int) -> np.ndarray:
    """Deterministic He-style Gaussian init, zero biases."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = np.zeros(arch.param_count)
    for (w0, b0, _), nin in zip(arch._offsets, arch.layer_sizes[:-1]):
        scale = np.sqrt(2.0 / nin)
        w[w0:b0] = rng.normal(0.0, scale, size=b0 - w0)
    return w


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def _forward_cached(arch: ModelArch, w: np.ndarray, x: np.ndarray):
    """Batch forward pass keeping activations for the backward pass."""
    layers = arch.unpack(w)
    a = x
    pre, acts = [], [x]
    for wm, b in layers[:-1]:
        z = a @ wm + b
        pre.append(z)
        a = _act(z, arch.activation)
        acts.append(a)
    wm, b = layers[-1]
    logits = a @ wm + b
    return logits, pre, acts


def forward(arch: ModelArch, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Logits for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != arch.layer_sizes[0]:
        raise ValueError(f"input has shape {x.shape}, arch expects ({arch.layer_sizes[0]},)")
    logits, _, _ = _forward_cached(arch, w, x[None, :])
    return logits[0]


def forward_batch(arch: ModelArch, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Logits for a batch of feature vectors, shape (n, class_count)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.layer_sizes[0]:
        raise ValueError(f"batch has shape {x.shape}, arch expects (n, {arch.layer_sizes[0]})")
    logits, _, _ = _forward_cached(arch, w, x)
    return logits


def grad_from_dlogits(arch: ModelArch, w: np.ndarray, x: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
    """Backpropagate per-sample logit gradients to a flat parameter gradient.

    ``dlogits`` must already carry any 1/n factor; the result is the exact
    gradient of sum_i <dlogits_i, logits_i> with respect to ``w``.
    """
    x = np.asarray(x, dtype=np.float64)
    logits, pre, acts = _forward_cached(arch, w, x)
    if dlogits.shape != logits.shape:
        raise ValueError(f"dlogits shape {dlogits.shape} != logits shape {logits.shape}")
    layers = arch.unpack(w)
    grad = np.zeros_like(np.asarray(w, dtype=np.float64))
    glayers = arch.unpack(grad)

    delta = dlogits
    for li in range(len(layers) - 1, -1, -1):
        gw, gb = glayers[li]
        gw += acts[li].T @ delta
        gb += delta.sum(axis=0)
        if li > 0:
            delta = (delta @ layers[li][0].T) * _act_grad(pre[li - 1], arch.activation)
    return grad


def softmax_T(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax with max-subtraction for overflow safety."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(z, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(z: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of logits against a hard label, plus d(loss)/d(logits)."""
    z = np.asarray(z, dtype=np.float64)
    if not 0 <= label < z.shape[-1]:
        raise ValueError(f"label {label} out of range for {z.shape[-1]} classes")
    p = softmax_T(z)
    grad = p.copy()
    grad[label] -= 1.0
    # -log p[label], computed from shifted logits to avoid log(0)
    shifted = z - z.max()
    loss = float(np.log(np.exp(shifted).sum()) - shifted[label])
    return loss, grad


def kl_div(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) over discrete distributions; q clamped at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.maximum(np.asarray(q, dtype=np.float64), 1e-12)
    mask = p > 0.0
    val = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    return max(val, 0.0)


def sgd_step(w: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if w.shape != grad.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {grad.shape}")
    return w - lr * grad


def ce_loss_and_grad(arch: ModelArch, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a minibatch and its flat parameter gradient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    logits, _, _ = _forward_cached(arch, w, x)
    n = x.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logZ - shifted[np.arange(n), y]))
    probs = softmax_T(logits)
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, grad_from_dlogits(arch, w, x, dlogits)


def evaluate(arch: ModelArch, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) over a dataset slice.

    Argmax ties resolve to the lowest class index.  The reduction is one
    vectorized pass in row order, so repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty slice")
    logits = forward_batch(arch, w, x)
    pred = np.argmax(logits, axis=1)
    acc = float(np.mean(pred == y))
    shifted = logits - logits.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logZ - shifted[np.arange(x.shape[0]), y]))
    return acc, loss
