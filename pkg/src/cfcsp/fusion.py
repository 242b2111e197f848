"""Softmax-sum ensemble fusion with an argmax decision."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, NoModelsError, ShapeError


@dataclass(frozen=True)
class LogitFrame:
    video_id: str
    frame_index: int
    model_id: str
    logits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.logits, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ShapeError(f"logits must be a non-empty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(
                f"non-finite logits in {self.video_id}/{self.model_id} frame {self.frame_index}"
            )
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        object.__setattr__(self, "logits", arr)


@dataclass(frozen=True)
class FusedScores:
    """Per-class sum of the contributing models' softmax outputs."""

    scores: np.ndarray
    contributing_models: tuple[str, ...] = field(default=())

    @property
    def k(self) -> int:
        return int(self.scores.shape[-1])


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a ``(n, k)`` array, stabilised by max subtraction."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("softmax input contains NaN or infinite values")
    if x.shape[0] == 0:
        return x.copy()
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax(logits) -> np.ndarray:
    """Softmax of a single score vector.

    >>> softmax([0.0, 0.0]).tolist()
    [0.5, 0.5]
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"expected a non-empty vector, got shape {x.shape}")
    return softmax_rows(x[None, :])[0]


def fuse(frames: Sequence[LogitFrame], k: int | None = None) -> FusedScores:
    """Sum the softmax of every model's logits for one (video, frame).

    Models are summed in lexicographic model-id order, which makes the
    result exactly independent of the order of ``frames``.
    """
    if not frames:
        raise NoModelsError("fuse needs at least one model")
    first = frames[0]
    kk = first.logits.size if k is None else k
    for fr in frames:
        if fr.logits.size != kk:
            raise ShapeError(
                f"model {fr.model_id!r} has {fr.logits.size} logits, expected {kk}"
            )
        if fr.video_id != first.video_id or fr.frame_index != first.frame_index:
            raise ShapeError(
                "fuse requires frames from one (video, frame_index); got "
                f"({fr.video_id}, {fr.frame_index}) vs ({first.video_id}, {first.frame_index})"
            )
    ordered = sorted(frames, key=lambda f: f.model_id)
    total = np.zeros(kk, dtype=np.float64)
    for fr in ordered:
        total += softmax(fr.logits)
    return FusedScores(total, tuple(f.model_id for f in ordered))


def fuse_arrays(per_model: dict[str, np.ndarray]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Vectorised :func:`fuse` over whole videos.

    ``per_model`` maps model id to an ``(n, k)`` logit array. Returns the
    ``(n, k)`` fused scores and the sorted model ids. Row ``i`` equals
    ``fuse`` applied to frame ``i`` bit for bit.
    """
    if not per_model:
        raise NoModelsError("fuse needs at least one model")
    ids = tuple(sorted(per_model))
    shapes = {m: np.shape(per_model[m]) for m in ids}
    if len(set(shapes.values())) != 1:
        raise ShapeError(f"per-model logit shapes differ: {shapes}")
    total = np.zeros(shapes[ids[0]], dtype=np.float64)
    for m in ids:
        total += softmax_rows(per_model[m])
    return total, ids


def decide(scores: FusedScores | np.ndarray) -> int:
    """Index of the maximum score; ties go to the lowest index."""
    s = scores.scores if isinstance(scores, FusedScores) else np.asarray(scores)
    if s.size == 0:
        raise ShapeError("cannot decide on empty scores")
    return int(np.argmax(s))


def decide_rows(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=-1)
