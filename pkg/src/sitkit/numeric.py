"""Dense layer primitives, losses, SGD and a finite-difference gradient oracle.

Everything operates on float64 numpy arrays and is a pure function of its
inputs: no op mutates an argument, updates return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


@dataclass(frozen=True)
class LayerSpec:
    """Shape and nonlinearity of one dense layer."""

    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")


def as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x @ w + b for a batch of row vectors."""
    x, w, b = as_f64(x), as_f64(w), as_f64(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"affine: input {x.shape} does not match weights {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"affine: bias {b.shape} does not match weights {w.shape}")
    return x @ w + b


def activation_forward(z: np.ndarray, kind: str) -> np.ndarray:
    z = as_f64(z)
    if kind == "linear":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        # equivalent piecewise form avoids overflow in exp for large |z|
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind == "tanh":
        return np.tanh(z)
    raise ConfigError(f"unknown activation {kind!r}")


def activation_backward(z: np.ndarray, upstream: np.ndarray, kind: str) -> np.ndarray:
    """upstream * derivative of the activation, evaluated at pre-activation z."""
    z, upstream = as_f64(z), as_f64(upstream)
    if z.shape != upstream.shape:
        raise DimensionError(f"activation backward: {z.shape} vs upstream {upstream.shape}")
    if kind == "linear":
        return upstream
    if kind == "relu":
        return upstream * (z > 0)
    if kind == "sigmoid":
        s = activation_forward(z, "sigmoid")
        return upstream * s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(z)
        return upstream * (1.0 - t * t)
    raise ConfigError(f"unknown activation {kind!r}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; 1-D input treated as one row."""
    z = as_f64(z)
    if z.size == 0:
        raise ConfigError("softmax of an empty vector")
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    shifted = z2 - z2.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out[0] if squeeze else out


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = as_f64(z)
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    shifted = z2 - z2.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return out[0] if squeeze else out


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """-log softmax(logits)[label], computed in log space."""
    logits = as_f64(logits)
    if logits.ndim != 1:
        raise DimensionError(f"cross_entropy expects a vector, got shape {logits.shape}")
    if not 0 <= label < logits.shape[0]:
        raise ConfigError(f"label {label} out of range for {logits.shape[0]} classes")
    return float(-log_softmax(logits)[label])


def softmax_xent_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed cross-entropy over a batch and its gradient wrt the logits.

    Gradient per row is softmax(logits) - onehot(label); summed (not averaged)
    loss keeps the gradient free of a 1/N factor.
    """
    logits = as_f64(logits)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels {labels.shape} do not match logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ConfigError(f"label out of range [0, {k}) in batch")
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(n), labels].sum())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad


def sgd_step(param: np.ndarray, grad: np.ndarray, mu: float) -> np.ndarray:
    """param - mu * grad as a new array."""
    param, grad = as_f64(param), as_f64(grad)
    if param.shape != grad.shape:
        raise DimensionError(f"sgd_step: param {param.shape} vs grad {grad.shape}")
    if mu < 0:
        raise ConfigError(f"learning rate must be >= 0, got {mu}")
    return param - mu * grad


def finite_diff_grad(f, at: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f per coordinate of `at`."""
    if h <= 0:
        raise ConfigError(f"step size must be > 0, got {h}")
    at = as_f64(at)
    grad = np.zeros_like(at)
    flat = at.ravel()
    for i in range(flat.size):
        orig = flat[i]
        x = at.copy()
        x.ravel()[i] = orig + h
        fp = float(f(x))
        x.ravel()[i] = orig - h
        fm = float(f(x))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value near coordinate {i}")
        grad.ravel()[i] = (fp - fm) / (2.0 * h)
    return grad


def init_layer(spec: LayerSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform +-sqrt(6/(in+out)) weights, zero biases."""
    bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
    w = rng.uniform(-bound, bound, size=(spec.in_dim, spec.out_dim))
    b = np.zeros(spec.out_dim)
    return w, b


def check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
