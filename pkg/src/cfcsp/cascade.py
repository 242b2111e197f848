"""Two-stage coarse -> negative routing and the per-video prediction pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    AlignmentError,
    CfcspError,
    InvariantError,
    MissingNegativeScoresError,
    NoModelsError,
    ShapeError,
)
from .fusion import FusedScores, decide, fuse_arrays
from .smoothing import SmoothingConfig, VideoLogitStream, smooth_batch
from .taxonomy import (
    DEFAULT_SCHEME,
    N_COARSE,
    N_NEGATIVE,
    LabelScheme,
    coarse_to_fine,
    from_negative,
)


class DecidedBy(str, Enum):
    COARSE_DIRECT = "CoarseDirect"
    NEGATIVE_NET = "NegativeNet"


class SmoothingStage(str, Enum):
    PRE_FUSION = "pre_fusion"
    POST_FUSION = "post_fusion"


@dataclass(frozen=True)
class StageOutputs:
    coarse: FusedScores
    negative: FusedScores | None = None


@dataclass(frozen=True)
class PredictionRecord:
    video_id: str
    frame_index: int
    label: int
    decided_by: DecidedBy
    coarse_scores: tuple[float, ...]
    negative_scores: tuple[float, ...] | None = None


def route(
    coarse: FusedScores,
    negative_provider: Callable[[], FusedScores],
    scheme: LabelScheme = DEFAULT_SCHEME,
) -> tuple[int, DecidedBy, FusedScores | None]:
    """Decide one frame's fine label.

    The provider is only called when the coarse decision is the negative
    group label. Returns ``(fine_label, decided_by, negative_scores)``.
    """
    if coarse.k != N_COARSE:
        raise ShapeError(f"coarse scores must have {N_COARSE} entries, got {coarse.k}")
    c = decide(coarse)
    if c != scheme.negative_coarse_index:
        return coarse_to_fine(c, scheme), DecidedBy.COARSE_DIRECT, None
    try:
        neg = negative_provider()
    except (AlignmentError, ShapeError):
        raise
    except CfcspError as exc:
        raise MissingNegativeScoresError(f"negative scores required but unavailable: {exc}") from exc
    if neg is None:
        raise MissingNegativeScoresError("negative scores required but provider returned nothing")
    if neg.k != N_NEGATIVE:
        raise ShapeError(f"negative scores must have {N_NEGATIVE} entries, got {neg.k}")
    return from_negative(decide(neg), scheme), DecidedBy.NEGATIVE_NET, neg


@dataclass(frozen=True)
class PipelineConfig:
    coarse_models: tuple[str, ...] = ()
    negative_models: tuple[str, ...] = ()
    coarse: SmoothingConfig = SmoothingConfig(0)
    negative: SmoothingConfig = SmoothingConfig(0)
    smoothing_stage: SmoothingStage = SmoothingStage.PRE_FUSION

    def with_window(self, w: int) -> "PipelineConfig":
        return PipelineConfig(
            self.coarse_models,
            self.negative_models,
            SmoothingConfig(w),
            SmoothingConfig(w),
            self.smoothing_stage,
        )


NegativeStreams = Union[Sequence[VideoLogitStream], Callable[[], Sequence[VideoLogitStream]]]
Smoother = Callable[[VideoLogitStream, SmoothingConfig], VideoLogitStream]


def _check_stage(streams: Sequence[VideoLogitStream], k: int, stage: str) -> None:
    for s in streams:
        if s.n and s.k != k:
            raise ShapeError(f"{stage} stream {s.model_id!r} has k={s.k}, expected {k}")


def _stage_scores(
    streams: Sequence[VideoLogitStream],
    cfg: SmoothingConfig,
    stage: SmoothingStage,
    smoother: Smoother,
    k: int,
    n: int,
    stage_name: str,
) -> tuple[np.ndarray, tuple[str, ...]]:
    if stage is SmoothingStage.PRE_FUSION:
        per_model = {s.model_id: smoother(s, cfg).frames for s in streams}
    else:
        per_model = {s.model_id: s.frames for s in streams}
    per_model = {m: (a if a.size else np.zeros((n, k))) for m, a in per_model.items()}
    fused, ids = fuse_arrays(per_model)
    if stage is SmoothingStage.POST_FUSION and cfg.enabled:
        fused_stream = VideoLogitStream(streams[0].video_id, "+".join(ids), fused, f"{stage_name}:fused")
        fused = smoother(fused_stream, cfg).frames
    return fused, ids


def predict_video(
    coarse_streams: Sequence[VideoLogitStream],
    negative_streams: NegativeStreams,
    cfg: PipelineConfig | tuple[SmoothingConfig, SmoothingConfig] = PipelineConfig(),
    scheme: LabelScheme = DEFAULT_SCHEME,
    smoother: Smoother = smooth_batch,
) -> list[PredictionRecord]:
    """Smooth, fuse and route every frame of one video.

    ``negative_streams`` may be a zero-argument callable; it is then invoked
    at most once, and only if some frame routes to the negative stage. When
    it is needed, the negative stage is smoothed over the whole video before
    any per-frame decision.
    """
    if isinstance(cfg, tuple):
        cfg = PipelineConfig(coarse=cfg[0], negative=cfg[1])
    if not coarse_streams:
        raise NoModelsError("predict_video needs at least one coarse stream")
    video_id = coarse_streams[0].video_id
    n = coarse_streams[0].n
    counts = [(s.model_id, s.n) for s in coarse_streams]
    if any(s.video_id != video_id for s in coarse_streams):
        raise AlignmentError(f"coarse streams mix videos: {sorted({s.video_id for s in coarse_streams})}")
    if any(c != n for _, c in counts):
        raise AlignmentError(f"{video_id}: coarse frame counts differ: {counts}")
    _check_stage(coarse_streams, N_COARSE, "coarse")

    coarse_scores, _ = _stage_scores(coarse_streams, cfg.coarse, cfg.smoothing_stage, smoother, N_COARSE, n, "coarse")

    negative_cache: list[np.ndarray] = []

    def load_negative() -> np.ndarray:
        if negative_cache:
            return negative_cache[0]
        streams = negative_streams() if callable(negative_streams) else negative_streams
        if not streams:
            raise NoModelsError(f"{video_id}: frames route to the negative stage but no negative models given")
        bad = [(s.model_id, s.n) for s in streams if s.n != n or s.video_id != video_id]
        if bad:
            raise AlignmentError(
                f"{video_id}: negative streams misaligned with {n} coarse frames: {bad}"
            )
        _check_stage(streams, N_NEGATIVE, "negative")
        scores, _ = _stage_scores(streams, cfg.negative, cfg.smoothing_stage, smoother, N_NEGATIVE, n, "negative")
        negative_cache.append(scores)
        return scores

    records = []
    for i in range(n):
        label, by, neg = route(
            FusedScores(coarse_scores[i]),
            lambda i=i: FusedScores(load_negative()[i]),
            scheme,
        )
        records.append(
            PredictionRecord(
                video_id,
                i,
                label,
                by,
                tuple(coarse_scores[i].tolist()),
                None if neg is None else tuple(neg.scores.tolist()),
            )
        )
    return records


def check_record(rec: PredictionRecord, scheme: LabelScheme = DEFAULT_SCHEME) -> None:
    """Raise InvariantError if ``rec`` breaks the routing invariants."""
    coarse_neg = int(np.argmax(rec.coarse_scores)) == scheme.negative_coarse_index
    by_neg = rec.decided_by is DecidedBy.NEGATIVE_NET
    has_neg = rec.negative_scores is not None
    if not (coarse_neg == by_neg == has_neg):
        raise InvariantError(f"{rec.video_id}[{rec.frame_index}]: inconsistent routing provenance")
    if not by_neg and scheme.is_negative(rec.label):
        raise InvariantError(f"{rec.video_id}[{rec.frame_index}]: negative label without negative stage")
