"""Run configuration: strict JSON loading with all defaults materialized.

Unknown keys anywhere in the document are rejected, so typos fail loudly
instead of silently falling back to defaults. The resolved configuration
(defaults filled in) is what gets written to the run manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .adaptation import AdaptConfig
from .corpus import SyntheticCorpusSpec
from .errors import ConfigError
from .model import Hyperparams
from .numeric import ACTIVATIONS, LayerSpec

DEFAULT_ACOUSTIC_HIDDEN = (64, 64, 64, 64)
DEFAULT_SPEAKER_HIDDEN = (32, 32)


@dataclass
class Topology:
    acoustic_hidden: tuple[int, ...] = DEFAULT_ACOUSTIC_HIDDEN
    speaker_hidden: tuple[int, ...] = DEFAULT_SPEAKER_HIDDEN
    activation: str = "relu"

    def validate(self) -> None:
        if len(self.acoustic_hidden) < 2:
            raise ConfigError("acoustic stack needs at least 2 hidden layers (one on each side of the split)")
        if any(d < 1 for d in self.acoustic_hidden) or any(d < 1 for d in self.speaker_hidden):
            raise ConfigError("hidden layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass
class Paths:
    out_dir: str = "runs/default"


@dataclass
class RunConfig:
    corpus: SyntheticCorpusSpec = field(default_factory=SyntheticCorpusSpec)
    topology: Topology = field(default_factory=Topology)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    paths: Paths = field(default_factory=Paths)

    def validate(self) -> None:
        self.topology.validate()
        self.hyper.validate()
        self.adapt.validate()
        if not 1 <= self.hyper.n_h <= len(self.topology.acoustic_hidden) - 1:
            raise ConfigError(
                f"n_h={self.hyper.n_h} out of range for {len(self.topology.acoustic_hidden)} hidden layers"
            )

    def acoustic_hidden_specs(self) -> list[LayerSpec]:
        dims = (self.corpus.spliced_dim,) + self.topology.acoustic_hidden
        return [LayerSpec(dims[i], dims[i + 1], self.topology.activation) for i in range(len(dims) - 1)]

    def speaker_hidden_specs(self) -> list[LayerSpec]:
        feat_dim = self.topology.acoustic_hidden[self.hyper.n_h - 1]
        dims = (feat_dim,) + self.topology.speaker_hidden
        return [LayerSpec(dims[i], dims[i + 1], self.topology.activation) for i in range(len(dims) - 1)]

    def to_dict(self) -> dict:
        c = self.corpus
        return {
            "corpus": {
                "n_senones": c.n_senones,
                "n_speakers": c.n_speakers,
                "n_test_speakers": c.n_test_speakers,
                "base_dim": c.base_dim,
                "frames_per_speaker_per_senone": c.frames_per_speaker_per_senone,
                "speaker_shift_scale": c.speaker_shift_scale,
                "speaker_warp_scale": c.speaker_warp_scale,
                "noise_scale": c.noise_scale,
                "splice_left": c.splice_left,
                "splice_right": c.splice_right,
                "seed": c.seed,
            },
            "topology": {
                "acoustic_hidden": list(self.topology.acoustic_hidden),
                "speaker_hidden": list(self.topology.speaker_hidden),
                "activation": self.topology.activation,
            },
            "hyper": {
                "lambda": self.hyper.lam,
                "mu": self.hyper.mu,
                "n_h": self.hyper.n_h,
                "batch_size": self.hyper.batch_size,
                "epochs": self.hyper.epochs,
                "seed": self.hyper.seed,
            },
            "adapt": {
                "layers_to_adapt": list(self.adapt.layers_to_adapt),
                "mu_adapt": self.adapt.mu_adapt,
                "epochs_adapt": self.adapt.epochs_adapt,
            },
            "paths": {"out_dir": self.paths.out_dir},
        }


def _take(doc: dict, section: str, allowed: dict) -> dict:
    """Pop known keys with defaults; reject anything unrecognized."""
    if not isinstance(doc, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in section {section!r}")
    return {key: doc.get(key, default) for key, default in allowed.items()}


def config_from_dict(doc: dict) -> RunConfig:
    top = _take(doc, "config", {"corpus": {}, "topology": {}, "hyper": {}, "adapt": {}, "paths": {}})
    d = SyntheticCorpusSpec()
    corpus_kw = _take(
        top["corpus"],
        "corpus",
        {
            "n_senones": d.n_senones,
            "n_speakers": d.n_speakers,
            "n_test_speakers": d.n_test_speakers,
            "base_dim": d.base_dim,
            "frames_per_speaker_per_senone": d.frames_per_speaker_per_senone,
            "speaker_shift_scale": d.speaker_shift_scale,
            "speaker_warp_scale": d.speaker_warp_scale,
            "noise_scale": d.noise_scale,
            "splice_left": d.splice_left,
            "splice_right": d.splice_right,
            "seed": d.seed,
        },
    )
    topo_kw = _take(
        top["topology"],
        "topology",
        {
            "acoustic_hidden": list(DEFAULT_ACOUSTIC_HIDDEN),
            "speaker_hidden": list(DEFAULT_SPEAKER_HIDDEN),
            "activation": "relu",
        },
    )
    h = Hyperparams()
    hyper_kw = _take(
        top["hyper"],
        "hyper",
        {
            "lambda": h.lam,
            "mu": h.mu,
            "n_h": h.n_h,
            "batch_size": h.batch_size,
            "epochs": h.epochs,
            "seed": h.seed,
        },
    )
    a = AdaptConfig()
    adapt_kw = _take(
        top["adapt"],
        "adapt",
        {
            "layers_to_adapt": list(a.layers_to_adapt),
            "mu_adapt": a.mu_adapt,
            "epochs_adapt": a.epochs_adapt,
        },
    )
    paths_kw = _take(top["paths"], "paths", {"out_dir": Paths().out_dir})

    config = RunConfig(
        corpus=SyntheticCorpusSpec(**corpus_kw),
        topology=Topology(
            acoustic_hidden=tuple(topo_kw["acoustic_hidden"]),
            speaker_hidden=tuple(topo_kw["speaker_hidden"]),
            activation=topo_kw["activation"],
        ),
        hyper=Hyperparams(
            lam=hyper_kw["lambda"],
            mu=hyper_kw["mu"],
            n_h=hyper_kw["n_h"],
            batch_size=hyper_kw["batch_size"],
            epochs=hyper_kw["epochs"],
            seed=hyper_kw["seed"],
        ),
        adapt=AdaptConfig(
            layers_to_adapt=tuple(adapt_kw["layers_to_adapt"]),
            mu_adapt=adapt_kw["mu_adapt"],
            epochs_adapt=adapt_kw["epochs_adapt"],
        ),
        paths=Paths(out_dir=paths_kw["out_dir"]),
    )
    config.validate()
    return config


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def write_manifest(config: RunConfig, path, extra: dict | None = None) -> None:
    doc = config.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
