"""Batch-level senone, speaker and total losses with analytic gradients.

Losses are summed over the batch frames by default (mean=True averages
instead, for learning-rate comparability across batch sizes). The gradient
helpers return per-layer (dW, db) pairs evaluated at the given parameters;
nothing here mutates a model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import Layer, SitModel, grl_backward
from .numeric import (
    activation_backward,
    activation_forward,
    affine_forward,
    as_f64,
    softmax_xent_batch,
)


@dataclass
class LayerGrad:
    w: np.ndarray
    b: np.ndarray


@dataclass
class LossBreakdown:
    senone_loss: float
    speaker_loss: float
    total_loss: float
    lam: float


def total_loss(senone_loss: float, speaker_loss: float, lam: float) -> float:
    return senone_loss - lam * speaker_loss


def forward_cached(x: np.ndarray, layers: list[Layer]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Forward pass keeping pre-activations and activations for backprop.

    Returns (acts, pres) with acts[0] = x and acts[i+1] the output of layer i.
    """
    acts = [as_f64(x)]
    pres = []
    for i, layer in enumerate(layers):
        if acts[-1].shape[1] != layer.in_dim:
            raise DimensionError(f"layer {i}: input has {acts[-1].shape[1]} columns, expected {layer.in_dim}")
        z = affine_forward(acts[-1], layer.w, layer.b)
        pres.append(z)
        acts.append(activation_forward(z, layer.activation))
    return acts, pres


def backward_cached(
    layers: list[Layer],
    acts: list[np.ndarray],
    pres: list[np.ndarray],
    upstream: np.ndarray,
) -> tuple[list[LayerGrad], np.ndarray]:
    """Backprop upstream = dL/d(output activation); returns per-layer grads and dL/dx."""
    grads: list[LayerGrad | None] = [None] * len(layers)
    g = upstream
    for i in reversed(range(len(layers))):
        dz = activation_backward(pres[i], g, layers[i].activation)
        grads[i] = LayerGrad(acts[i].T @ dz, dz.sum(axis=0))
        g = dz @ layers[i].w.T
    return grads, g  # type: ignore[return-value]


def _head_loss(logits: np.ndarray, labels: np.ndarray, mean: bool) -> tuple[float, np.ndarray]:
    loss, dlogits = softmax_xent_batch(logits, labels)
    if mean:
        n = logits.shape[0]
        return loss / n, dlogits / n
    return loss, dlogits


def senone_loss(
    x: np.ndarray,
    senone_labels: np.ndarray,
    feature_layers: list[Layer],
    senone_layers: list[Layer],
    mean: bool = False,
) -> float:
    acts, _ = forward_cached(x, feature_layers + senone_layers)
    loss, _ = _head_loss(acts[-1], senone_labels, mean)
    return loss


def speaker_loss(
    x: np.ndarray,
    speaker_labels: np.ndarray,
    feature_layers: list[Layer],
    speaker_layers: list[Layer],
    mean: bool = False,
) -> float:
    acts, _ = forward_cached(x, feature_layers)
    spk_acts, _ = forward_cached(acts[-1], speaker_layers)
    loss, _ = _head_loss(spk_acts[-1], speaker_labels, mean)
    return loss


def stack_grads(
    x: np.ndarray,
    labels: np.ndarray,
    layers: list[Layer],
    mean: bool = False,
) -> tuple[float, list[LayerGrad]]:
    """Cross-entropy loss and gradients for a plain single-stack classifier."""
    acts, pres = forward_cached(x, layers)
    loss, dlogits = _head_loss(acts[-1], labels, mean)
    grads, _ = backward_cached(layers, acts, pres, dlogits)
    return loss, grads


def sit_grads(
    x: np.ndarray,
    senone_labels: np.ndarray,
    speaker_labels: np.ndarray,
    model: SitModel,
    lam: float,
    mean: bool = False,
) -> tuple[LossBreakdown, list[LayerGrad], list[LayerGrad], list[LayerGrad]]:
    """Gradients of the adversarial objective for all three parameter groups.

    Feature-extractor gradient is d(senone)/d(theta_f) - lam * d(speaker)/d(theta_f),
    realized as a single backward pass whose boundary gradient is the senone
    term plus the reversal hook applied to the speaker term. The speaker
    classifier's own gradient bypasses the hook (it descends its loss), and the
    senone classifier never sees speaker labels.
    """
    n_f = len(model.feature_layers)
    acts, pres = forward_cached(x, model.feature_layers)
    f = acts[-1]

    sen_acts, sen_pres = forward_cached(f, model.senone_layers)
    sen_loss, dsen_logits = _head_loss(sen_acts[-1], senone_labels, mean)
    sen_grads, df_senone = backward_cached(model.senone_layers, sen_acts, sen_pres, dsen_logits)

    spk_acts, spk_pres = forward_cached(f, model.speaker_layers)
    spk_loss, dspk_logits = _head_loss(spk_acts[-1], speaker_labels, mean)
    spk_grads, df_speaker = backward_cached(model.speaker_layers, spk_acts, spk_pres, dspk_logits)

    # lam == 0 skips the reversed term entirely so the feature/senone update is
    # bit-identical to plain SI training on the same batch.
    if lam != 0.0:
        df = df_senone + grl_backward(df_speaker, lam)
    else:
        df = df_senone
    feat_grads, _ = backward_cached(model.feature_layers, acts, pres, df)

    breakdown = LossBreakdown(sen_loss, spk_loss, total_loss(sen_loss, spk_loss, lam), lam)
    return breakdown, feat_grads, sen_grads, spk_grads
