"""Unsupervised constrained re-training (CRT) on held-out speakers.

Targets are the model's own first-pass predictions (per-frame argmax of the
senone posteriors, the desk-scale stand-in for a 1-best decoding alignment),
computed once before adaptation and held fixed. Only the configured layers of
the combined acoustic stack are re-estimated; every other parameter comes out
bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import AcousticModel, SitModel, model_senone_posteriors
from .objectives import stack_grads
from .training import _apply, _guard

_ADAPT_SHUFFLE_STREAM = 3


@dataclass
class AdaptConfig:
    layers_to_adapt: tuple[int, ...] = (0, 1)  # bottom of the acoustic stack
    mu_adapt: float = 0.0003
    epochs_adapt: int = 8

    def validate(self) -> None:
        if self.mu_adapt < 0:
            raise ConfigError(f"mu_adapt must be >= 0, got {self.mu_adapt}")
        if self.epochs_adapt < 0:
            raise ConfigError("epochs_adapt must be >= 0")
        if len(set(self.layers_to_adapt)) != len(self.layers_to_adapt):
            raise ConfigError("layers_to_adapt contains duplicates")


@dataclass
class AdaptReportRow:
    speaker: int
    pre_accuracy: float
    post_accuracy: float
    pseudo_label_agreement: float


def pseudo_label(model: AcousticModel | SitModel, frames: np.ndarray) -> np.ndarray:
    """First-pass targets: argmax senone posterior per frame, ties to the lowest index."""
    return model_senone_posteriors(model, frames).argmax(axis=1)


def crt_adapt(
    model: AcousticModel | SitModel,
    frames: np.ndarray,
    config: AdaptConfig,
    targets: np.ndarray | None = None,
    batch_size: int = 64,
    seed: int = 0,
):
    """Re-estimate only config.layers_to_adapt of the acoustic stack.

    `targets` defaults to pseudo-labels from the unadapted model; passing
    ground-truth labels gives the oracle-adaptation variant.
    """
    config.validate()
    if frames.shape[0] == 0:
        raise ConfigError("cannot adapt on an empty frame set")
    stack = model.layers if isinstance(model, AcousticModel) else model.acoustic_stack()
    for i in config.layers_to_adapt:
        if not 0 <= i < len(stack):
            raise ConfigError(f"adapt layer index {i} out of range for {len(stack)} layers")
    if targets is None:
        targets = pseudo_label(model, frames)
    adapt_set = set(config.layers_to_adapt)

    layers = [l.copy() for l in stack]
    rng = np.random.default_rng([seed, _ADAPT_SHUFFLE_STREAM])
    for epoch in range(config.epochs_adapt):
        order = rng.permutation(frames.shape[0])
        for b, start in enumerate(range(0, frames.shape[0], batch_size)):
            idx = order[start : start + batch_size]
            loss, grads = stack_grads(frames[idx], targets[idx], layers)
            updated = _apply(layers, grads, config.mu_adapt)
            layers = [updated[i] if i in adapt_set else layers[i] for i in range(len(layers))]
            _guard(loss, layers, epoch, b)

    if isinstance(model, AcousticModel):
        return AcousticModel(layers, model.n_senones)
    n_f = len(model.feature_layers)
    return SitModel(
        layers[:n_f],
        layers[n_f:],
        [l.copy() for l in model.speaker_layers],
        model.n_senones,
        model.n_speakers,
        model.hyper,
    )


def write_adapt_report(path, rows: list[AdaptReportRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["speaker", "pre_accuracy", "post_accuracy", "pseudo_label_agreement"])
        for r in rows:
            writer.writerow([r.speaker, repr(r.pre_accuracy), repr(r.post_accuracy), repr(r.pseudo_label_agreement)])
