"""The acoustic stack, the speaker classifier, and the gradient reversal hook.

An SI model is one dense stack ending in a linear layer of |Q| senone logits.
A SIT model splits that stack at depth n_h into a feature extractor and a
senone classifier, and attaches a speaker classifier to the deep feature F.
The reversal hook lives at the feature/speaker boundary: forward is the
identity (the speaker classifier reads F unchanged), backward multiplies the
speaker gradient by -lambda before it reaches the feature extractor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigError, DimensionError
from .numeric import (
    LayerSpec,
    activation_forward,
    affine_forward,
    as_f64,
    init_layer,
    softmax,
)


@dataclass
class Layer:
    w: np.ndarray  # (in_dim, out_dim)
    b: np.ndarray  # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "Layer":
        return Layer(self.w.copy(), self.b.copy(), self.activation)


@dataclass
class Hyperparams:
    lam: float = 3.0  # adversarial weight, config/CLI key "lambda"
    mu: float = 0.003
    n_h: int = 2
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0

    def validate(self) -> None:
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.mu <= 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if self.n_h < 1:
            raise ConfigError(f"n_h must be >= 1, got {self.n_h}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass
class AcousticModel:
    """Single-stack senone classifier: hidden layers plus a linear output layer."""

    layers: list[Layer]
    n_senones: int

    def copy(self) -> "AcousticModel":
        return AcousticModel([l.copy() for l in self.layers], self.n_senones)


@dataclass
class SitModel:
    """The three parameter groups of adversarial training."""

    feature_layers: list[Layer]
    senone_layers: list[Layer]
    speaker_layers: list[Layer]
    n_senones: int
    n_speakers: int
    hyper: Hyperparams = field(default_factory=Hyperparams)

    @property
    def feature_dim(self) -> int:
        return self.feature_layers[-1].out_dim

    def acoustic_stack(self) -> list[Layer]:
        return self.feature_layers + self.senone_layers

    def copy(self) -> "SitModel":
        return SitModel(
            [l.copy() for l in self.feature_layers],
            [l.copy() for l in self.senone_layers],
            [l.copy() for l in self.speaker_layers],
            self.n_senones,
            self.n_speakers,
            self.hyper,
        )


def build_stack(specs: list[LayerSpec], rng: np.random.Generator) -> list[Layer]:
    layers = []
    for i, spec in enumerate(specs):
        if i > 0 and spec.in_dim != specs[i - 1].out_dim:
            raise DimensionError(
                f"layer {i}: in_dim {spec.in_dim} does not match previous out_dim {specs[i - 1].out_dim}"
            )
        w, b = init_layer(spec, rng)
        layers.append(Layer(w, b, spec.activation))
    return layers


def forward_layers(x: np.ndarray, layers: list[Layer]) -> np.ndarray:
    """Plain forward pass through a stack; see objectives for the cached variant."""
    a = as_f64(x)
    for i, layer in enumerate(layers):
        if a.shape[1] != layer.in_dim:
            raise DimensionError(f"layer {i}: input has {a.shape[1]} columns, expected {layer.in_dim}")
        a = activation_forward(affine_forward(a, layer.w, layer.b), layer.activation)
    return a


def feature_extract(x: np.ndarray, feature_layers: list[Layer]) -> np.ndarray:
    """Deep features F: the activation after the first n_h layers."""
    return forward_layers(x, feature_layers)


def senone_posteriors(f: np.ndarray, senone_layers: list[Layer]) -> np.ndarray:
    return softmax(forward_layers(f, senone_layers))


def speaker_posteriors(f: np.ndarray, speaker_layers: list[Layer]) -> np.ndarray:
    return softmax(forward_layers(f, speaker_layers))


def stack_posteriors(x: np.ndarray, layers: list[Layer]) -> np.ndarray:
    """Softmax over the logits of a full single stack."""
    return softmax(forward_layers(x, layers))


def model_senone_posteriors(model: AcousticModel | SitModel, x: np.ndarray) -> np.ndarray:
    if isinstance(model, AcousticModel):
        return stack_posteriors(x, model.layers)
    return stack_posteriors(x, model.acoustic_stack())


def grl_backward(upstream_grad: np.ndarray, lam: float) -> np.ndarray:
    """Backward pass of the gradient reversal hook: -lambda * upstream."""
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return -lam * as_f64(upstream_grad)


def split_pretrained(model: AcousticModel, n_h: int) -> tuple[list[Layer], list[Layer]]:
    """Split a trained single stack into (feature extractor, senone classifier).

    The feature extractor takes the first n_h hidden layers; the senone
    classifier takes the remaining hidden layers plus the output layer.
    Parameter values are copied bit-exactly.
    """
    n_hidden = len(model.layers) - 1  # last layer is the senone output layer
    if not 1 <= n_h <= n_hidden - 1:
        raise ConfigError(f"n_h must be in [1, {n_hidden - 1}] for {n_hidden} hidden layers, got {n_h}")
    feature = [l.copy() for l in model.layers[:n_h]]
    senone = [l.copy() for l in model.layers[n_h:]]
    return feature, senone


# --- checkpoint I/O ------------------------------------------------------
#
# JSON document; float64 values survive json round trips exactly because
# Python serializes them via repr (shortest string that parses back to the
# same double).

_FORMAT = "sitkit-checkpoint-v1"


def _layer_to_doc(layer: Layer) -> dict:
    return {
        "in_dim": layer.in_dim,
        "out_dim": layer.out_dim,
        "activation": layer.activation,
        "w": layer.w.tolist(),
        "b": layer.b.tolist(),
    }


def _layer_from_doc(doc: dict) -> Layer:
    w = np.array(doc["w"], dtype=np.float64)
    b = np.array(doc["b"], dtype=np.float64)
    if w.shape != (doc["in_dim"], doc["out_dim"]) or b.shape != (doc["out_dim"],):
        raise CheckpointError(f"layer shapes {w.shape}/{b.shape} disagree with declared dims")
    return Layer(w, b, doc["activation"])


def _hyper_to_doc(h: Hyperparams) -> dict:
    return {
        "lambda": h.lam,
        "mu": h.mu,
        "n_h": h.n_h,
        "batch_size": h.batch_size,
        "epochs": h.epochs,
        "seed": h.seed,
    }


def _hyper_from_doc(doc: dict) -> Hyperparams:
    return Hyperparams(
        lam=doc["lambda"],
        mu=doc["mu"],
        n_h=doc["n_h"],
        batch_size=doc["batch_size"],
        epochs=doc["epochs"],
        seed=doc["seed"],
    )


def save_checkpoint(model: AcousticModel | SitModel, path, hyper: Hyperparams | None = None) -> None:
    if isinstance(model, AcousticModel):
        doc = {
            "format": _FORMAT,
            "kind": "si",
            "n_senones": model.n_senones,
            "layers": [_layer_to_doc(l) for l in model.layers],
        }
        if hyper is not None:
            doc["hyper"] = _hyper_to_doc(hyper)
    else:
        doc = {
            "format": _FORMAT,
            "kind": "sit",
            "n_senones": model.n_senones,
            "n_speakers": model.n_speakers,
            "hyper": _hyper_to_doc(model.hyper),
            "feature_layers": [_layer_to_doc(l) for l in model.feature_layers],
            "senone_layers": [_layer_to_doc(l) for l in model.senone_layers],
            "speaker_layers": [_layer_to_doc(l) for l in model.speaker_layers],
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> AcousticModel | SitModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: not a valid checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise CheckpointError(f"{path}: missing or unknown checkpoint format marker")
    try:
        if doc["kind"] == "si":
            return AcousticModel([_layer_from_doc(d) for d in doc["layers"]], doc["n_senones"])
        if doc["kind"] == "sit":
            return SitModel(
                [_layer_from_doc(d) for d in doc["feature_layers"]],
                [_layer_from_doc(d) for d in doc["senone_layers"]],
                [_layer_from_doc(d) for d in doc["speaker_layers"]],
                doc["n_senones"],
                doc["n_speakers"],
                _hyper_from_doc(doc["hyper"]),
            )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing checkpoint field {exc}") from exc
    raise CheckpointError(f"{path}: unknown model kind {doc.get('kind')!r}")
