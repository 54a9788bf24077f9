"""Synthetic multi-speaker frame corpus, feature pipeline, and corpus file I/O.

Each raw frame is built from a per-senone prototype distorted by per-speaker
shift and warp plus isotropic noise:

    x = (I + warp_scale * W_a) @ mu_q + shift_scale * delta_a + noise_scale * eps

so senone and speaker factors are controllable and known. Frames are i.i.d.
within a (senone, speaker) cell; splicing and normalization mirror a standard
front end (context concatenation, global mean/variance normalization with the
training statistics re-applied to test data).
"""

from __future__ import annotations

import csv
import struct
import warnings
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    CorpusChecksumError,
    CorpusFormatError,
    CorpusTruncatedError,
)

_MAGIC = b"SITC"
_VERSION = 1

# sub-stream tags so prototype, per-speaker and noise draws are independent
_PROTO_STREAM = 10
_SPEAKER_STREAM = 11
_NOISE_STREAM = 12
_PARTITIONS = {"train": 0, "test": 1}


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    n_senones: int = 20
    n_speakers: int = 8        # training speakers
    n_test_speakers: int = 2   # disjoint held-out speakers
    base_dim: int = 13
    frames_per_speaker_per_senone: int = 100
    speaker_shift_scale: float = 1.5
    speaker_warp_scale: float = 0.12
    noise_scale: float = 0.35
    splice_left: int = 2
    splice_right: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("n_senones", "n_speakers", "n_test_speakers", "base_dim", "frames_per_speaker_per_senone"):
            if getattr(self, name) < 1:
                raise ConfigError(f"corpus spec field {name} must be >= 1, got {getattr(self, name)}")
        for name in ("speaker_shift_scale", "speaker_warp_scale", "noise_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"corpus spec field {name} must be >= 0, got {getattr(self, name)}")
        if self.splice_left < 0 or self.splice_right < 0:
            raise ConfigError("splice context must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def spliced_dim(self) -> int:
        return self.base_dim * (self.splice_left + self.splice_right + 1)


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray  # epsilon-substituted where the raw std was zero


@dataclass
class FrameBatch:
    """Spliced, normalized frames with aligned senone and speaker labels."""

    frames: np.ndarray          # (N, d_in) float64
    senone_labels: np.ndarray   # (N,) int64 in [0, n_senones)
    speaker_labels: np.ndarray  # (N,) int64, partition-local indices
    n_senones: int
    n_speakers: int
    stats: NormStats | None = None

    def __post_init__(self):
        n = self.frames.shape[0]
        if self.senone_labels.shape != (n,) or self.speaker_labels.shape != (n,):
            raise ConfigError("label sequences are not aligned with the frames")
        if n:
            if self.senone_labels.min() < 0 or self.senone_labels.max() >= self.n_senones:
                raise ConfigError("senone label out of vocabulary range")
            if self.speaker_labels.min() < 0 or self.speaker_labels.max() >= self.n_speakers:
                raise ConfigError("speaker label out of vocabulary range")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def d_in(self) -> int:
        return self.frames.shape[1]


def senone_prototypes(spec: SyntheticCorpusSpec) -> np.ndarray:
    """The seeded per-senone prototype vectors, shared across partitions."""
    rng = np.random.default_rng([spec.seed, _PROTO_STREAM])
    return rng.standard_normal((spec.n_senones, spec.base_dim))


def _speaker_params(spec: SyntheticCorpusSpec, global_speaker: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([spec.seed, _SPEAKER_STREAM, global_speaker])
    delta = rng.standard_normal(spec.base_dim)
    warp = rng.standard_normal((spec.base_dim, spec.base_dim))
    return delta, warp


def gen_corpus(spec: SyntheticCorpusSpec, partition: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw (unspliced, unnormalized) frames plus senone and speaker labels.

    Test-partition speakers use prototype-sharing but disjoint speaker
    identities (global indices offset by the training speaker count). Speaker
    labels in the result are partition-local. Frames are ordered by speaker,
    then senone, then repetition, so each speaker occupies a contiguous block.
    """
    if partition not in _PARTITIONS:
        raise ConfigError(f"unknown partition {partition!r}")
    n_spk = spec.n_speakers if partition == "train" else spec.n_test_speakers
    offset = 0 if partition == "train" else spec.n_speakers
    protos = senone_prototypes(spec)
    noise_rng = np.random.default_rng([spec.seed, _NOISE_STREAM, _PARTITIONS[partition]])

    per_cell = spec.frames_per_speaker_per_senone
    n = n_spk * spec.n_senones * per_cell
    frames = np.empty((n, spec.base_dim))
    senones = np.empty(n, dtype=np.int64)
    speakers = np.empty(n, dtype=np.int64)
    row = 0
    for a in range(n_spk):
        delta, warp = _speaker_params(spec, offset + a)
        for q in range(spec.n_senones):
            base = protos[q] + spec.speaker_warp_scale * (warp @ protos[q]) + spec.speaker_shift_scale * delta
            eps = noise_rng.standard_normal((per_cell, spec.base_dim))
            frames[row : row + per_cell] = base + spec.noise_scale * eps
            senones[row : row + per_cell] = q
            speakers[row : row + per_cell] = a
            row += per_cell
    return frames, senones, speakers


def splice(frames: np.ndarray, left: int, right: int) -> np.ndarray:
    """Concatenate each row with its left/right context rows, edge-replicated."""
    frames = np.asarray(frames, dtype=np.float64)
    n = frames.shape[0]
    if n < 1:
        raise ConfigError("cannot splice an empty frame sequence")
    cols = []
    for off in range(-left, right + 1):
        idx = np.clip(np.arange(n) + off, 0, n - 1)
        cols.append(frames[idx])
    return np.concatenate(cols, axis=1)


def _splice_per_speaker(frames: np.ndarray, speakers: np.ndarray, left: int, right: int) -> np.ndarray:
    """Splice each speaker's contiguous frame block as its own sequence."""
    out = []
    start = 0
    for i in range(1, len(speakers) + 1):
        if i == len(speakers) or speakers[i] != speakers[start]:
            out.append(splice(frames[start:i], left, right))
            start = i
    return np.concatenate(out, axis=0)


def normalize(frames: np.ndarray) -> tuple[np.ndarray, NormStats]:
    """Global per-dimension mean/variance normalization; stats are returned
    so they can be re-applied (never re-estimated) to test data."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 2:
        raise ConfigError("normalization needs at least 2 frames")
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    zero = std == 0.0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} constant dimension(s); using epsilon std", stacklevel=2)
        std = np.where(zero, 1e-8, std)
    return (frames - mean) / std, NormStats(mean, std)


def apply_normalization(frames: np.ndarray, stats: NormStats) -> np.ndarray:
    return (np.asarray(frames, dtype=np.float64) - stats.mean) / stats.std


def build_frame_batches(spec: SyntheticCorpusSpec) -> tuple[FrameBatch, FrameBatch]:
    """Full pipeline: generate, splice (per speaker block), normalize.

    Training statistics are applied unchanged to the test partition.
    """
    raw_tr, sen_tr, spk_tr = gen_corpus(spec, "train")
    raw_te, sen_te, spk_te = gen_corpus(spec, "test")
    sp_tr = _splice_per_speaker(raw_tr, spk_tr, spec.splice_left, spec.splice_right)
    sp_te = _splice_per_speaker(raw_te, spk_te, spec.splice_left, spec.splice_right)
    norm_tr, stats = normalize(sp_tr)
    norm_te = apply_normalization(sp_te, stats)
    train = FrameBatch(norm_tr, sen_tr, spk_tr, spec.n_senones, spec.n_speakers, stats)
    test = FrameBatch(norm_te, sen_te, spk_te, spec.n_senones, spec.n_test_speakers, stats)
    return train, test


# --- SITC binary format ---------------------------------------------------
#
# magic "SITC" | version u8 | header: N, d, n_senones, n_speakers as <u32 |
# frames as <f8 row-major | senone labels as <u32 | speaker labels as <u32 |
# CRC32 of header+frames+labels as <u32.

_HEADER = struct.Struct("<IIII")


def save_corpus(batch: FrameBatch, path) -> None:
    if batch.n_frames == 0:
        raise ConfigError("refusing to save an empty corpus")
    header = _HEADER.pack(batch.n_frames, batch.d_in, batch.n_senones, batch.n_speakers)
    body = (
        header
        + np.ascontiguousarray(batch.frames, dtype="<f8").tobytes()
        + batch.senone_labels.astype("<u4").tobytes()
        + batch.speaker_labels.astype("<u4").tobytes()
    )
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(_MAGIC + bytes([_VERSION]) + body + struct.pack("<I", crc))


def load_corpus(path) -> FrameBatch:
    with open(path, "rb") as fh:
        blob = fh.read()
    prefix = len(_MAGIC) + 1
    if len(blob) < prefix + _HEADER.size + 4:
        raise CorpusTruncatedError(f"{path}: file shorter than a minimal corpus")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise CorpusFormatError(f"{path}: bad magic bytes {blob[:4]!r}")
    if blob[len(_MAGIC)] != _VERSION:
        raise CorpusFormatError(f"{path}: unsupported version {blob[len(_MAGIC)]}")
    n, d, n_senones, n_speakers = _HEADER.unpack_from(blob, prefix)
    if n == 0 or d == 0 or n_senones == 0 or n_speakers == 0:
        raise CorpusFormatError(f"{path}: header declares an empty corpus or vocabulary")
    body_len = _HEADER.size + n * d * 8 + n * 4 * 2
    expected = prefix + body_len + 4
    if len(blob) < expected:
        raise CorpusTruncatedError(f"{path}: expected {expected} bytes, found {len(blob)}")
    if len(blob) > expected:
        raise CorpusFormatError(f"{path}: {len(blob) - expected} trailing bytes after checksum")
    body = blob[prefix : prefix + body_len]
    (crc,) = struct.unpack_from("<I", blob, prefix + body_len)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CorpusChecksumError(f"{path}: CRC32 mismatch")
    off = _HEADER.size
    frames = np.frombuffer(body, dtype="<f8", count=n * d, offset=off).reshape(n, d).copy()
    off += n * d * 8
    senones = np.frombuffer(body, dtype="<u4", count=n, offset=off).astype(np.int64)
    off += n * 4
    speakers = np.frombuffer(body, dtype="<u4", count=n, offset=off).astype(np.int64)
    if senones.max() >= n_senones or speakers.max() >= n_speakers:
        raise CorpusFormatError(f"{path}: label outside the declared vocabulary")
    return FrameBatch(frames, senones, speakers, n_senones, n_speakers)


def export_csv(batch: FrameBatch, path) -> None:
    """One row per frame: features..., senone, speaker. For inspection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(batch.d_in)] + ["senone", "speaker"])
        for i in range(batch.n_frames):
            writer.writerow(
                [repr(v) for v in batch.frames[i]]
                + [int(batch.senone_labels[i]), int(batch.speaker_labels[i])]
            )
