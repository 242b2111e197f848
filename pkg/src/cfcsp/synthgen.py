"""Synthetic ground truth and toy per-model logit streams, plus the
repeat-factor oversampler.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence`` with fixed spawn keys, so every output is a pure function
of its arguments and is identical across platforms:

* truth segments      -> ``SeedSequence(seed, spawn_key=(0,))``
* shared model noise  -> ``SeedSequence(seed, spawn_key=(1,))``
* per-model noise     -> ``SeedSequence(seed, spawn_key=(2, crc32(model_id)))``

Video ``i`` of a corpus uses ``seed ^ i``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataio
from .errors import ParamsError, UndefinedFactorError
from .smoothing import VideoLogitStream
from .taxonomy import DEFAULT_SCHEME, N_COARSE, N_FINE, N_NEGATIVE, LabelScheme

UNIFORM_PRIOR = tuple([1.0 / N_FINE] * N_FINE)


@dataclass(frozen=True)
class SynthParams:
    seed: int = 7
    n_frames: int = 3000
    frame_rate: float = 30.0
    segment_len_range: tuple[int, int] = (60, 300)
    class_prior: tuple[float, ...] = UNIFORM_PRIOR
    logit_gain: float = 2.0
    noise_sigma: float = 1.5
    model_decorrelation: float = 0.5

    def validate(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ParamsError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_frames < 0:
            raise ParamsError("n_frames must be >= 0")
        lo, hi = self.segment_len_range
        if lo < 1 or lo > hi:
            raise ParamsError(f"segment_len_range must satisfy 1 <= min <= max, got {(lo, hi)}")
        prior = np.asarray(self.class_prior, dtype=np.float64)
        if prior.shape != (N_FINE,) or (prior < 0).any() or abs(prior.sum() - 1.0) > 1e-9:
            raise ParamsError("class_prior must be 8 non-negative numbers summing to 1")
        if self.noise_sigma < 0:
            raise ParamsError("noise_sigma must be >= 0")
        if not 0 <= self.model_decorrelation <= 1:
            raise ParamsError("model_decorrelation must lie in [0, 1]")
        if self.frame_rate <= 0:
            raise ParamsError("frame_rate must be positive")


@dataclass
class SynthVideo:
    video_id: str
    truth: np.ndarray
    coarse_streams: list[VideoLogitStream] = field(default_factory=list)
    negative_streams: list[VideoLogitStream] = field(default_factory=list)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def model_key(model_id: str) -> int:
    return zlib.crc32(model_id.encode("utf-8"))


def gen_truth(params: SynthParams) -> np.ndarray:
    """Piecewise-constant fine labels with uniform segment lengths."""
    rng = _rng(params.seed, 0)
    lo, hi = params.segment_len_range
    prior = np.asarray(params.class_prior, dtype=np.float64)
    prior = prior / prior.sum()
    out = np.empty(params.n_frames, dtype=np.int64)
    pos = 0
    while pos < params.n_frames:
        length = int(rng.integers(lo, hi + 1))
        label = int(rng.choice(N_FINE, p=prior))
        out[pos : pos + length] = label
        pos += length
    return out


def gen_video(
    params: SynthParams,
    model_ids: Sequence[str],
    scheme: LabelScheme = DEFAULT_SCHEME,
    video_id: str = "synth",
) -> SynthVideo:
    """Ground truth plus one coarse and one negative logit stream per model.

    Each model's logits are ``gain * onehot(true class) + noise``. Noise
    blends a draw shared by all models with a per-model draw; the
    decorrelation knob sets the per-model share of the variance. Frames
    whose truth is not a negative expression carry no signal in the
    negative stage.
    """
    params.validate()
    if not model_ids:
        raise ParamsError("gen_video needs at least one model id")
    if len(set(model_ids)) != len(model_ids):
        raise ParamsError("model ids must be distinct")
    n = params.n_frames
    truth = gen_truth(params)

    coarse_idx = np.asarray(scheme.fine_to_coarse, dtype=np.int64)[truth]
    fine_to_neg = np.full(N_FINE, -1, dtype=np.int64)
    for j, f in enumerate(scheme.negative_to_fine):
        fine_to_neg[f] = j
    neg_idx = fine_to_neg[truth]

    coarse_signal = np.zeros((n, N_COARSE))
    coarse_signal[np.arange(n), coarse_idx] = params.logit_gain
    neg_signal = np.zeros((n, N_NEGATIVE))
    is_neg = neg_idx >= 0
    neg_signal[np.flatnonzero(is_neg), neg_idx[is_neg]] = params.logit_gain

    shared = _rng(params.seed, 1)
    shared_c = shared.standard_normal((n, N_COARSE))
    shared_n = shared.standard_normal((n, N_NEGATIVE))
    d = params.model_decorrelation
    a, b = math.sqrt(1.0 - d), math.sqrt(d)

    video = SynthVideo(video_id, truth)
    for m in model_ids:
        own = _rng(params.seed, 2, model_key(m))
        own_c = own.standard_normal((n, N_COARSE))
        own_n = own.standard_normal((n, N_NEGATIVE))
        c = coarse_signal + params.noise_sigma * (a * shared_c + b * own_c)
        g = neg_signal + params.noise_sigma * (a * shared_n + b * own_n)
        video.coarse_streams.append(VideoLogitStream(video_id, m, c, "coarse", params.frame_rate))
        video.negative_streams.append(VideoLogitStream(video_id, m, g, "negative", params.frame_rate))
    return video


def video_seed(seed: int, ordinal: int) -> int:
    return seed ^ ordinal


def video_name(ordinal: int) -> str:
    return f"video{ordinal:03d}"


def gen_corpus(
    params: SynthParams,
    model_ids: Sequence[str],
    n_videos: int,
    scheme: LabelScheme = DEFAULT_SCHEME,
) -> list[SynthVideo]:
    return [
        gen_video(replace(params, seed=video_seed(params.seed, i)), model_ids, scheme, video_name(i))
        for i in range(n_videos)
    ]


def write_corpus(out_dir: str | Path, videos: Sequence[SynthVideo], scheme: LabelScheme = DEFAULT_SCHEME) -> None:
    """Write ``logits/`` and ``annotations/`` under ``out_dir``."""
    out = Path(out_dir)
    for v in videos:
        for s in v.coarse_streams:
            dataio.write_logits(out / "logits" / dataio.logit_filename(v.video_id, "coarse", s.model_id), s, "coarse")
        for s in v.negative_streams:
            dataio.write_logits(
                out / "logits" / dataio.logit_filename(v.video_id, "negative", s.model_id), s, "negative"
            )
        dataio.write_annotations(out / "annotations" / f"{v.video_id}{dataio.LABEL_SUFFIX}", v.truth.tolist(), scheme)


# -- repeat-factor oversampling ------------------------------------------------


def repeat_factors(class_freqs: Sequence[float], threshold_t: float) -> np.ndarray:
    """``r(c) = max(1, sqrt(t / f(c)))`` for each class frequency."""
    f = np.asarray(class_freqs, dtype=np.float64)
    if not 0 < threshold_t <= 1:
        raise ParamsError(f"threshold must lie in (0, 1], got {threshold_t}")
    if (f <= 0).any():
        raise UndefinedFactorError("repeat factor undefined for a class with zero frequency")
    if abs(f.sum() - 1.0) > 1e-9:
        raise ParamsError(f"class frequencies must sum to 1, got {f.sum()}")
    return np.maximum(1.0, np.sqrt(threshold_t / f))


def label_frequencies(labels: Sequence[int]) -> dict[int, float]:
    values, counts = np.unique(np.asarray(labels, dtype=np.int64), return_counts=True)
    n = counts.sum()
    return {int(v): float(c / n) for v, c in zip(values, counts)}


def resample_indices(labels: Sequence[int], threshold_t: float, seed: int) -> np.ndarray:
    """Oversample indices of rare classes.

    Index ``i`` appears ``floor(r)`` times plus once more with probability
    ``frac(r)``, where ``r`` is the repeat factor of its class. The result is
    shuffled; both the extra draws and the shuffle come from ``seed``.
    """
    lab = np.asarray(labels, dtype=np.int64)
    if lab.size == 0:
        raise ParamsError("resample_indices needs at least one label")
    freqs = label_frequencies(lab)
    classes = sorted(freqs)
    factors = dict(zip(classes, repeat_factors([freqs[c] for c in classes], threshold_t).tolist()))
    r = np.array([factors[c] for c in lab.tolist()])
    whole = np.floor(r)
    rng = np.random.Generator(np.random.PCG64(seed))
    extra = rng.random(lab.size) < (r - whole)
    reps = whole.astype(np.int64) + extra
    return rng.permutation(np.repeat(np.arange(lab.size), reps))
