"""Senone discriminability and speaker invariance diagnostics.

Frame accuracy stands in for WER everywhere in this package: there is no
decoder, so accuracy of the per-frame senone argmax is the recognition
metric. Speaker invariance is measured two ways: a freshly trained probe
classifier on frozen features (how much speaker information remains), and a
scalar ratio of between-speaker centroid spread to within-cell scatter.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import FrameBatch
from .errors import ConfigError
from .model import AcousticModel, Hyperparams, SitModel, model_senone_posteriors
from .numeric import LayerSpec
from .training import train_classifier
from .tsne import tsne_embed

_PROBE_SPLIT_STREAM = 4

PROBE_HYPER = Hyperparams(lam=0.0, mu=0.003, n_h=1, batch_size=64, epochs=15, seed=0)


@dataclass
class EvalReport:
    senone_frame_accuracy: float
    speaker_probe_accuracy: float | None
    invariance_ratio: float | None
    per_speaker_accuracy: dict[int, float]

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "senone_frame_accuracy": self.senone_frame_accuracy,
                    "speaker_probe_accuracy": self.speaker_probe_accuracy,
                    "invariance_ratio": self.invariance_ratio,
                    "per_speaker_accuracy": {str(k): v for k, v in self.per_speaker_accuracy.items()},
                },
                fh,
                indent=2,
            )


def frame_accuracy(model: AcousticModel | SitModel, batch: FrameBatch) -> float:
    if batch.n_frames == 0:
        raise ConfigError("cannot evaluate on an empty batch")
    pred = model_senone_posteriors(model, batch.frames).argmax(axis=1)
    return float((pred == batch.senone_labels).mean())


def per_speaker_frame_accuracy(model: AcousticModel | SitModel, batch: FrameBatch) -> dict[int, float]:
    pred = model_senone_posteriors(model, batch.frames).argmax(axis=1)
    out = {}
    for a in range(batch.n_speakers):
        sel = batch.speaker_labels == a
        if sel.any():
            out[a] = float((pred[sel] == batch.senone_labels[sel]).mean())
    return out


def speaker_probe(
    features: np.ndarray,
    speaker_labels: np.ndarray,
    probe_hidden_dims: tuple[int, ...] = (32, 32),
    seed: int = 0,
    train_frac: float = 0.8,
    hyper: Hyperparams | None = None,
) -> float:
    """Accuracy of a freshly trained speaker classifier on frozen features.

    Trains on a seeded train_frac split and reports accuracy on the disjoint
    remainder, so the score measures recoverable speaker information rather
    than memorization.
    """
    speaker_labels = np.asarray(speaker_labels)
    n_speakers = int(speaker_labels.max()) + 1 if speaker_labels.size else 0
    if n_speakers < 2:
        raise ConfigError("speaker probe needs at least 2 speakers")
    n = features.shape[0]
    order = np.random.default_rng([seed, _PROBE_SPLIT_STREAM]).permutation(n)
    n_train = int(round(n * train_frac))
    if n_train < 1 or n_train >= n:
        raise ConfigError(f"train fraction {train_frac} leaves an empty split for {n} frames")
    train_idx, test_idx = order[:n_train], order[n_train:]

    h = hyper if hyper is not None else PROBE_HYPER
    h = Hyperparams(h.lam, h.mu, h.n_h, h.batch_size, h.epochs, seed)
    dims = (features.shape[1],) + tuple(probe_hidden_dims)
    specs = [LayerSpec(dims[i], dims[i + 1], "relu") for i in range(len(dims) - 1)]
    layers = train_classifier(features[train_idx], speaker_labels[train_idx], specs, n_speakers, h)

    from .model import stack_posteriors

    pred = stack_posteriors(features[test_idx], layers).argmax(axis=1)
    return float((pred == speaker_labels[test_idx]).mean())


def invariance_ratio(features: np.ndarray, senone_labels: np.ndarray, speaker_labels: np.ndarray) -> float:
    """Between-speaker centroid spread over within-cell scatter, averaged.

    For each senone: the mean pairwise distance between that senone's
    per-speaker centroids. Normalized by the mean RMS distance of frames to
    their own (senone, speaker) cell centroid. Lower means more
    speaker-invariant features.
    """
    senone_labels = np.asarray(senone_labels)
    speaker_labels = np.asarray(speaker_labels)
    between = []
    scatters = []
    for q in np.unique(senone_labels):
        q_sel = senone_labels == q
        centroids = []
        for a in np.unique(speaker_labels[q_sel]):
            cell = features[q_sel & (speaker_labels == a)]
            if cell.shape[0] == 0:
                continue
            c = cell.mean(axis=0)
            centroids.append(c)
            scatters.append(float(np.sqrt(((cell - c) ** 2).sum(axis=1).mean())))
        if len(centroids) < 2:
            warnings.warn(f"senone {q}: fewer than 2 speaker cells, skipped", stacklevel=2)
            continue
        cs = np.asarray(centroids)
        dists = np.sqrt(_pairwise_sq(cs))
        iu = np.triu_indices(len(cs), k=1)
        between.append(float(dists[iu].mean()))
    if not between:
        raise ConfigError("no senone with at least 2 speaker cells")
    numer = float(np.mean(between))
    denom = float(np.mean(scatters))
    if denom == 0.0:
        return 0.0 if numer == 0.0 else float("inf")
    return numer / denom


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d = sq[:, None] - 2.0 * (x @ x.T) + sq[None, :]
    return np.maximum(d, 0.0)


def pca_2d(features: np.ndarray) -> np.ndarray:
    """Scores on the top-2 principal components; component signs are fixed by
    making each component's largest-magnitude loading positive."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] < 3:
        raise ConfigError(f"PCA projection needs at least 3 points, got {x.shape[0]}")
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2].copy()
    for k in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[k]))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    return centered @ comps.T


def project_2d(features: np.ndarray, method: str, seed: int = 0, perplexity: float = 30.0) -> np.ndarray:
    if method == "pca":
        return pca_2d(features)
    if method == "tsne":
        return tsne_embed(features, seed=seed, perplexity=perplexity)
    raise ConfigError(f"unknown projection method {method!r}")


def write_projection_csv(path, coords: np.ndarray, senone_labels: np.ndarray, speaker_labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "senone", "speaker"])
        for i in range(coords.shape[0]):
            writer.writerow([repr(coords[i, 0]), repr(coords[i, 1]), int(senone_labels[i]), int(speaker_labels[i])])


def evaluate(
    model: AcousticModel | SitModel,
    batch: FrameBatch,
    features: np.ndarray | None = None,
    probe_seed: int = 0,
) -> EvalReport:
    """Full report; probe and invariance need features and >= 2 speakers."""
    probe_acc = None
    inv = None
    if features is not None and batch.n_speakers >= 2:
        probe_acc = speaker_probe(features, batch.speaker_labels, seed=probe_seed)
        inv = invariance_ratio(features, batch.senone_labels, batch.speaker_labels)
    return EvalReport(
        senone_frame_accuracy=frame_accuracy(model, batch),
        speaker_probe_accuracy=probe_acc,
        invariance_ratio=inv,
        per_speaker_accuracy=per_speaker_frame_accuracy(model, batch),
    )
