"""Baseline SI training and the adversarial SIT loop.

One SIT step updates all three parameter groups simultaneously from gradients
evaluated at the pre-update parameters:

    theta_f <- theta_f - mu * (d(senone)/d(theta_f) - lam * d(speaker)/d(theta_f))
    theta_s <- theta_s - mu * d(speaker)/d(theta_s)
    theta_y <- theta_y - mu * d(senone)/d(theta_y)

Determinism contract: identical (corpus, topology, hyper, seed) produce
bit-identical parameters. RNG streams are derived from the seed with fixed
tags so stack init, speaker-classifier init and batch shuffling never share a
stream; continued SI training and SIT therefore see the same batch schedule
for the same seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .corpus import FrameBatch
from .errors import ConfigError, NumericError
from .model import AcousticModel, Hyperparams, Layer, SitModel, build_stack, split_pretrained
from .numeric import LayerSpec, sgd_step
from .objectives import LayerGrad, LossBreakdown, sit_grads, stack_grads

_INIT_STREAM = 0
_SHUFFLE_STREAM = 1
_SPEAKER_INIT_STREAM = 2

DIVERGENCE_LIMIT = 1e6


@dataclass
class TrainLog:
    """Per-batch loss rows plus per-epoch adversary accuracy (SIT only)."""

    rows: list[tuple[int, int, LossBreakdown]] = field(default_factory=list)
    speaker_accuracy: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "batch", "senone_loss", "speaker_loss", "total_loss"])
            for epoch, batch, b in self.rows:
                writer.writerow([epoch, batch, repr(b.senone_loss), repr(b.speaker_loss), repr(b.total_loss)])


def _batch_schedule(n: int, batch_size: int, epochs: int, seed: int):
    """Yield (epoch, batch_index, frame_indices); identical across callers for a seed."""
    rng = np.random.default_rng([seed, _SHUFFLE_STREAM])
    for epoch in range(epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, batch_size)):
            yield epoch, b, order[start : start + batch_size]


def _apply(layers: list[Layer], grads: list[LayerGrad], mu: float) -> list[Layer]:
    return [
        Layer(sgd_step(l.w, g.w, mu), sgd_step(l.b, g.b, mu), l.activation)
        for l, g in zip(layers, grads)
    ]


def _guard(loss: float, layers: list[Layer], epoch: int, batch: int) -> None:
    if not np.isfinite(loss) or abs(loss) > DIVERGENCE_LIMIT:
        raise NumericError(f"divergence at epoch {epoch} batch {batch}: total loss {loss}")
    for l in layers:
        if not (np.all(np.isfinite(l.w)) and np.all(np.isfinite(l.b))):
            raise NumericError(f"non-finite parameters at epoch {epoch} batch {batch}")


def train_classifier(
    x: np.ndarray,
    labels: np.ndarray,
    hidden_specs: list[LayerSpec],
    n_classes: int,
    hyper: Hyperparams,
    initial: list[Layer] | None = None,
    log: TrainLog | None = None,
) -> list[Layer]:
    """Minibatch cross-entropy SGD for a single stack; the shared SI engine.

    hidden_specs describe the hidden layers; a linear output layer of
    n_classes logits is appended automatically. `initial` continues training
    an existing stack with the same schedule a fresh run would use.
    """
    if x.shape[0] == 0:
        raise ConfigError("cannot train on an empty corpus")
    if initial is None:
        if hidden_specs and hidden_specs[0].in_dim != x.shape[1]:
            raise ConfigError(f"topology expects {hidden_specs[0].in_dim} inputs, corpus has {x.shape[1]}")
        out_in = hidden_specs[-1].out_dim if hidden_specs else x.shape[1]
        specs = list(hidden_specs) + [LayerSpec(out_in, n_classes, "linear")]
        layers = build_stack(specs, np.random.default_rng([hyper.seed, _INIT_STREAM]))
    else:
        layers = [l.copy() for l in initial]
    for epoch, b, idx in _batch_schedule(x.shape[0], hyper.batch_size, hyper.epochs, hyper.seed):
        loss, grads = stack_grads(x[idx], labels[idx], layers)
        layers = _apply(layers, grads, hyper.mu)
        _guard(loss, layers, epoch, b)
        if log is not None:
            log.rows.append((epoch, b, LossBreakdown(loss, 0.0, loss, 0.0)))
    return layers


def train_si(
    corpus: FrameBatch,
    hidden_specs: list[LayerSpec],
    hyper: Hyperparams,
    initial: AcousticModel | None = None,
    log: TrainLog | None = None,
) -> AcousticModel:
    """Baseline speaker-independent training: senone cross-entropy only."""
    hyper.validate()
    layers = train_classifier(
        corpus.frames,
        corpus.senone_labels,
        hidden_specs,
        corpus.n_senones,
        hyper,
        initial=initial.layers if initial is not None else None,
        log=log,
    )
    return AcousticModel(layers, corpus.n_senones)


def sit_step(
    x: np.ndarray,
    senone_labels: np.ndarray,
    speaker_labels: np.ndarray,
    model: SitModel,
    hyper: Hyperparams,
) -> tuple[SitModel, LossBreakdown]:
    """One simultaneous SGD update of all three parameter groups."""
    breakdown, feat_g, sen_g, spk_g = sit_grads(x, senone_labels, speaker_labels, model, hyper.lam)
    new = SitModel(
        _apply(model.feature_layers, feat_g, hyper.mu),
        _apply(model.senone_layers, sen_g, hyper.mu),
        _apply(model.speaker_layers, spk_g, hyper.mu),
        model.n_senones,
        model.n_speakers,
        hyper,
    )
    return new, breakdown


def init_sit_model(
    si_model: AcousticModel,
    speaker_hidden_specs: list[LayerSpec],
    n_speakers: int,
    hyper: Hyperparams,
) -> SitModel:
    """Split the pretrained stack at n_h and attach a freshly seeded speaker classifier."""
    feature, senone = split_pretrained(si_model, hyper.n_h)
    feat_dim = feature[-1].out_dim
    if speaker_hidden_specs:
        if speaker_hidden_specs[0].in_dim != feat_dim:
            raise ConfigError(
                f"speaker classifier expects {speaker_hidden_specs[0].in_dim} inputs, deep feature has {feat_dim}"
            )
        spk_out_in = speaker_hidden_specs[-1].out_dim
    else:
        spk_out_in = feat_dim
    spk_specs = list(speaker_hidden_specs) + [LayerSpec(spk_out_in, n_speakers, "linear")]
    speaker = build_stack(spk_specs, np.random.default_rng([hyper.seed, _SPEAKER_INIT_STREAM]))
    return SitModel(feature, senone, speaker, si_model.n_senones, n_speakers, hyper)


def train_sit(
    si_model: AcousticModel,
    corpus: FrameBatch,
    hyper: Hyperparams,
    speaker_hidden_specs: list[LayerSpec],
    log: TrainLog | None = None,
) -> SitModel:
    """Adversarial training starting from a pretrained SI stack.

    Logs a LossBreakdown per batch and, per epoch, the speaker classifier's
    training accuracy on the deep features (the adversary's own score).
    """
    hyper.validate()
    if corpus.n_frames == 0:
        raise ConfigError("cannot train on an empty corpus")
    model = init_sit_model(si_model, speaker_hidden_specs, corpus.n_speakers, hyper)
    epoch_seen = -1
    for epoch, b, idx in _batch_schedule(corpus.n_frames, hyper.batch_size, hyper.epochs, hyper.seed):
        if epoch != epoch_seen and epoch_seen >= 0 and log is not None:
            log.speaker_accuracy.append(_speaker_train_accuracy(model, corpus))
        epoch_seen = epoch
        model, breakdown = sit_step(
            corpus.frames[idx], corpus.senone_labels[idx], corpus.speaker_labels[idx], model, hyper
        )
        _guard(
            breakdown.total_loss,
            model.feature_layers + model.senone_layers + model.speaker_layers,
            epoch,
            b,
        )
        if log is not None:
            log.rows.append((epoch, b, breakdown))
    if log is not None and epoch_seen >= 0:
        log.speaker_accuracy.append(_speaker_train_accuracy(model, corpus))
    return model


def _speaker_train_accuracy(model: SitModel, corpus: FrameBatch) -> float:
    from .model import feature_extract, speaker_posteriors

    f = feature_extract(corpus.frames, model.feature_layers)
    pred = speaker_posteriors(f, model.speaker_layers).argmax(axis=1)
    return float((pred == corpus.speaker_labels).mean())
