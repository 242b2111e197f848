"""Coarse-to-fine cascaded expression prediction with temporal smoothing.

The pipeline consumes per-frame, per-model logit streams for two stages
(a 5-way coarse stage and a 4-way negative stage), smooths each stream over
time, fuses models by summing softmax outputs, and routes every frame
through the cascade to one of 8 expression labels.
"""

from .cascade import DecidedBy, PipelineConfig, PredictionRecord, predict_video, route
from .fusion import FusedScores, LogitFrame, decide, fuse, softmax
from .metrics import ConfusionMatrix, F1Report, confusion, f1_report, flip_rate
from .smoothing import SmoothingConfig, StreamingSmoother, VideoLogitStream, smooth_batch
from .taxonomy import DEFAULT_SCHEME, LabelScheme, from_negative, load_scheme, to_coarse

__all__ = [
    "DEFAULT_SCHEME",
    "ConfusionMatrix",
    "DecidedBy",
    "F1Report",
    "FusedScores",
    "LabelScheme",
    "LogitFrame",
    "PipelineConfig",
    "PredictionRecord",
    "SmoothingConfig",
    "StreamingSmoother",
    "VideoLogitStream",
    "confusion",
    "decide",
    "f1_report",
    "flip_rate",
    "from_negative",
    "fuse",
    "load_scheme",
    "predict_video",
    "route",
    "smooth_batch",
    "softmax",
    "to_coarse",
]
