"""Temporal smoothing of per-frame logit vectors.

Every frame vector is augmented with the mean of its centred temporal
neighbourhood::

    f'_i = f_i + mean(f_j for |j - i| <= w // 2, 0 <= j < n)

Windows are truncated at the sequence edges and the mean divides by the
number of frames actually present, so a constant stream ``c`` maps to ``2c``
everywhere. ``w = 0`` switches smoothing off entirely (identity).

Both forms subtract a per-stream reference vector (the first frame) before
summing and add it back to the mean. That keeps window sums small, which
bounds the running-sum drift of the streaming form, and makes the constant
case exact: all offsets are zero, so the mean is the reference itself.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError, ShapeError

RECOMPUTE_EVERY = 4096


class BoundaryPolicy(str, Enum):
    TRUNCATE_RENORMALIZE = "truncate_renormalize"


@dataclass(frozen=True)
class SmoothingConfig:
    window_w: int = 0
    boundary_policy: BoundaryPolicy = BoundaryPolicy.TRUNCATE_RENORMALIZE

    def __post_init__(self) -> None:
        if isinstance(self.window_w, bool) or int(self.window_w) != self.window_w:
            raise ValueError(f"window must be an integer, got {self.window_w!r}")
        if self.window_w < 0:
            raise ValueError(f"window must be >= 0, got {self.window_w}")
        object.__setattr__(self, "window_w", int(self.window_w))
        object.__setattr__(self, "boundary_policy", BoundaryPolicy(self.boundary_policy))

    @property
    def half(self) -> int:
        return self.window_w // 2

    @property
    def enabled(self) -> bool:
        return self.window_w > 0


@dataclass
class VideoLogitStream:
    """Per-frame logits of one model on one video, as an ``(n, k)`` array."""

    video_id: str
    model_id: str
    frames: np.ndarray
    stage: str = ""
    frame_rate_hint: float = 30.0

    def __post_init__(self) -> None:
        try:
            arr = np.asarray(self.frames, dtype=np.float64)
        except ValueError:
            raise ShapeError(f"{self.video_id}/{self.model_id}: frames have non-uniform length") from None
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2:
            raise ShapeError(
                f"{self.video_id}/{self.model_id}: frames must be (n, k), got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{self.video_id}/{self.model_id}: non-finite logits")
        self.frames = arr

    @property
    def n(self) -> int:
        return int(self.frames.shape[0])

    @property
    def k(self) -> int:
        return int(self.frames.shape[1])

    def __len__(self) -> int:
        return self.n

    def with_frames(self, frames: np.ndarray) -> "VideoLogitStream":
        return VideoLogitStream(self.video_id, self.model_id, frames, self.stage, self.frame_rate_hint)


def window_counts(n: int, half: int) -> np.ndarray:
    """``|W(i)|`` for every position of an ``n``-frame stream."""
    i = np.arange(n)
    return (np.minimum(i + half, n - 1) - np.maximum(i - half, 0) + 1).astype(np.float64)


def smooth_array(x: np.ndarray, window_w: int) -> np.ndarray:
    """Smooth an ``(n, k)`` array; see the module docstring for the rule."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected (n, k) frames, got shape {x.shape}")
    if window_w == 0:
        return x.copy()
    n, k = x.shape
    if n == 0:
        return x.copy()
    half = window_w // 2
    ref = x[0]
    padded = np.zeros((n + 2 * half, k), dtype=np.float64)
    padded[half : half + n] = x - ref
    # (n, k, 2*half+1) strided view; zero padding contributes nothing to the sums.
    sums = sliding_window_view(padded, 2 * half + 1, axis=0).sum(axis=-1)
    mean = ref + sums / window_counts(n, half)[:, None]
    return x + mean


def smooth_batch(stream: VideoLogitStream, cfg: SmoothingConfig) -> VideoLogitStream:
    """Smooth a whole stream at once. Output has the same length and width."""
    if not cfg.enabled:
        return stream.with_frames(stream.frames.copy())
    return stream.with_frames(smooth_array(stream.frames, cfg.window_w))


class StreamingSmoother:
    """Online form of :func:`smooth_batch`.

    Frame ``i`` is emitted once frame ``i + w // 2`` has been pushed; the
    tail is emitted by :meth:`flush`. Concatenated outputs equal the batch
    result. Not safe for concurrent use.
    """

    def __init__(self, cfg: SmoothingConfig):
        self.cfg = cfg
        self.half = cfg.half
        self.capacity = 2 * self.half + 1
        self._raw: deque[np.ndarray] = deque()
        self._off: deque[np.ndarray] = deque()
        self._ref: np.ndarray | None = None
        self._sum: np.ndarray | None = None
        self._k: int | None = None
        self._pushed = 0  # frames pushed so far
        self._emitted = 0  # next position to emit
        self._since_recompute = 0

    @property
    def k(self) -> int | None:
        return self._k

    @property
    def pending(self) -> int:
        return self._pushed - self._emitted

    def _validate(self, frame) -> np.ndarray:
        arr = np.asarray(frame, dtype=np.float64)
        if arr.ndim != 1:
            raise ShapeError(f"expected a vector, got shape {arr.shape}")
        if self._k is not None and arr.shape[0] != self._k:
            raise ShapeError(f"frame has length {arr.shape[0]}, expected {self._k}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("frame contains NaN or infinite values")
        return arr

    def _lower(self, i: int) -> int:
        return i - self.half if i > self.half else 0

    def _emit(self, last: int) -> np.ndarray:
        # Emit position self._emitted, whose window currently spans the buffer.
        i = self._emitted
        lo = self._lower(i)
        count = last - lo + 1
        out = self._raw[i - self._buffer_start] + (self._ref + self._sum / count)
        self._emitted += 1
        # Drop frames no longer needed by any later window.
        new_lo = self._lower(self._emitted)
        while self._buffer_start < new_lo:
            self._sum -= self._off.popleft()
            self._raw.popleft()
        return out

    @property
    def _buffer_start(self) -> int:
        return self._pushed - len(self._raw)

    def push(self, frame) -> np.ndarray | None:
        """Add the next frame; return a smoothed frame if one became ready."""
        arr = self._validate(frame)
        if self._k is None:
            self._k = arr.shape[0]
        if self.cfg.window_w == 0:
            self._pushed += 1
            self._emitted += 1
            return arr.copy()
        if self._ref is None:
            self._ref = arr.copy()
            self._sum = np.zeros_like(arr)
        off = arr - self._ref
        self._raw.append(arr.copy())
        self._off.append(off)
        self._sum += off
        self._pushed += 1
        self._since_recompute += 1
        if self._since_recompute >= RECOMPUTE_EVERY:
            self._sum = np.sum(np.asarray(self._off), axis=0)
            self._since_recompute = 0
        if self._pushed - 1 - self._emitted >= self.half:
            return self._emit(self._pushed - 1)
        return None

    def flush(self) -> list[np.ndarray]:
        """Emit every remaining position with right-truncated windows."""
        out = []
        last = self._pushed - 1
        while self._emitted < self._pushed:
            out.append(self._emit(last))
        return out

    def run(self, frames) -> list[np.ndarray]:
        out = []
        for fr in frames:
            y = self.push(fr)
            if y is not None:
                out.append(y)
        out.extend(self.flush())
        return out


def streaming_new(cfg: SmoothingConfig) -> StreamingSmoother:
    return StreamingSmoother(cfg)


def streaming_push(s: StreamingSmoother, frame) -> np.ndarray | None:
    return s.push(frame)


def streaming_flush(s: StreamingSmoother) -> list[np.ndarray]:
    return s.flush()
