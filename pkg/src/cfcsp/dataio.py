"""On-disk formats: logit files, annotation/prediction files, pipeline configs.

Logit file (``.cspl``)::

    CSPL1,<video_id>,<model_id>,<stage>,<k>,<n>
    <k comma-separated reals>      # one row per frame, n rows

Reals are written with ``repr`` so a write/read cycle is bit exact.

Annotation and prediction files follow the Aff-Wild2 EXPR layout: a header
line of comma-separated class names, then one integer per frame (``-1``
marks an unannotated frame in annotations).

Every file is UTF-8 with LF line endings and no BOM.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._kv import parse_key_values, split_list
from .cascade import PipelineConfig, PredictionRecord, SmoothingStage
from .errors import ContiguityError, MissingFileError, ParseError
from .smoothing import SmoothingConfig, VideoLogitStream
from .taxonomy import DEFAULT_SCHEME, SCHEME_KEYS, LabelScheme, canonical_name, scheme_from_mapping

LOGIT_MAGIC = "CSPL1"
LOGIT_SUFFIX = ".cspl"
LABEL_SUFFIX = ".txt"
STAGE_K = {"coarse": 5, "negative": 4, "fine": 8}


@dataclass(frozen=True)
class LogitFileHeader:
    magic: str
    video_id: str
    model_id: str
    stage: str
    k: int
    n: int

    def line(self) -> str:
        return f"{self.magic},{self.video_id},{self.model_id},{self.stage},{self.k},{self.n}"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_lines(path: Path) -> list[str]:
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingFileError(f"{path}: file not found") from None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(path, 1, f"not valid UTF-8: {exc.reason}") from None
    if text.startswith("\ufeff"):
        raise ParseError(path, 1, "byte-order mark not allowed")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


# -- logits -----------------------------------------------------------------


def _check_id(value: str, what: str) -> None:
    if not value or any(ch in value for ch in ",\n\r"):
        raise ValueError(f"{what} must be non-empty and free of commas/newlines: {value!r}")


def _parse_header(path: Path, line: str) -> LogitFileHeader:
    parts = line.split(",")
    if not parts or parts[0] != LOGIT_MAGIC:
        raise ParseError(path, 1, f"bad magic: expected {LOGIT_MAGIC!r}")
    if len(parts) != 6:
        raise ParseError(path, 1, f"header must have 6 fields, found {len(parts)}")
    _, video_id, model_id, stage, k_s, n_s = parts
    if not video_id or not model_id:
        raise ParseError(path, 1, "empty video or model id")
    if stage not in STAGE_K:
        raise ParseError(path, 1, f"unknown stage {stage!r}")
    try:
        k, n = int(k_s), int(n_s)
    except ValueError:
        raise ParseError(path, 1, "k and n must be integers") from None
    if k != STAGE_K[stage]:
        raise ParseError(path, 1, f"stage {stage!r} requires k={STAGE_K[stage]}, header says k={k}")
    if n < 0:
        raise ParseError(path, 1, f"negative frame count {n}")
    return LogitFileHeader(LOGIT_MAGIC, video_id, model_id, stage, k, n)


def read_logit_header(path: str | Path) -> LogitFileHeader:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            first = fh.readline()
    except FileNotFoundError:
        raise MissingFileError(f"{path}: file not found") from None
    except UnicodeDecodeError:
        raise ParseError(path, 1, "not valid UTF-8") from None
    return _parse_header(path, first.rstrip("\n"))


def read_logits(path: str | Path) -> VideoLogitStream:
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, 1, "empty file")
    hdr = _parse_header(path, lines[0])
    rows = lines[1:]
    if len(rows) != hdr.n:
        raise ParseError(path, len(lines), f"expected {hdr.n} rows, found {len(rows)}")
    frames = np.empty((hdr.n, hdr.k), dtype=np.float64)
    for i, row in enumerate(rows):
        lineno = i + 2
        cells = row.split(",")
        if len(cells) != hdr.k:
            raise ParseError(path, lineno, f"expected {hdr.k} values, found {len(cells)}")
        for j, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(path, lineno, f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(path, lineno, f"non-finite value {cell!r}")
            frames[i, j] = v
    return VideoLogitStream(hdr.video_id, hdr.model_id, frames, stage=hdr.stage)


def logits_to_text(stream: VideoLogitStream, stage: str | None = None) -> str:
    stage = stage or stream.stage
    if stage not in STAGE_K:
        raise ValueError(f"unknown stage {stage!r}")
    _check_id(stream.video_id, "video_id")
    _check_id(stream.model_id, "model_id")
    n = stream.n
    k = stream.k if n else STAGE_K[stage]
    if k != STAGE_K[stage]:
        raise ValueError(f"stage {stage!r} requires k={STAGE_K[stage]}, stream has k={k}")
    out = [LogitFileHeader(LOGIT_MAGIC, stream.video_id, stream.model_id, stage, k, n).line()]
    out.extend(",".join(repr(v) for v in row) for row in stream.frames.tolist())
    return "\n".join(out) + "\n"


def write_logits(path: str | Path, stream: VideoLogitStream, stage: str | None = None) -> None:
    atomic_write_text(path, logits_to_text(stream, stage))


def logit_filename(video_id: str, stage: str, model_id: str) -> str:
    return f"{video_id}__{stage}__{model_id}{LOGIT_SUFFIX}"


def index_logits(directory: str | Path) -> dict[tuple[str, str, str], Path]:
    """Map ``(video_id, stage, model_id)`` to file path by reading headers."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFileError(f"{directory}: logit directory not found")
    index: dict[tuple[str, str, str], Path] = {}
    for p in sorted(directory.glob(f"*{LOGIT_SUFFIX}")):
        h = read_logit_header(p)
        key = (h.video_id, h.stage, h.model_id)
        if key in index:
            raise ParseError(p, 1, f"duplicate logits for {key}; also in {index[key]}")
        index[key] = p
    return index


# -- label files --------------------------------------------------------------


def _read_label_file(path: Path, scheme: LabelScheme, allow_invalid: bool) -> list[int]:
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, 1, "missing header line")
    header = [canonical_name(c) for c in lines[0].split(",")]
    if tuple(header) != scheme.fine_names:
        raise ParseError(
            path, 1, f"header mismatch: expected {','.join(scheme.fine_names)}, got {lines[0]!r}"
        )
    lo = -1 if allow_invalid else 0
    hi = len(scheme.fine_names) - 1
    labels = []
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            v = int(raw.strip())
        except ValueError:
            raise ParseError(path, lineno, f"not an integer label: {raw!r}") from None
        if not lo <= v <= hi:
            raise ParseError(path, lineno, f"label {v} out of range [{lo}, {hi}]")
        labels.append(v)
    return labels


def read_annotations(path: str | Path, scheme: LabelScheme = DEFAULT_SCHEME) -> list[int]:
    """Ground-truth labels; ``-1`` entries are unannotated frames."""
    return _read_label_file(Path(path), scheme, allow_invalid=True)


def read_predictions(path: str | Path, scheme: LabelScheme = DEFAULT_SCHEME) -> list[int]:
    return _read_label_file(Path(path), scheme, allow_invalid=False)


def labels_to_text(labels: Iterable[int], scheme: LabelScheme = DEFAULT_SCHEME) -> str:
    body = "".join(f"{int(v)}\n" for v in labels)
    return ",".join(scheme.fine_names) + "\n" + body


def write_annotations(path: str | Path, labels: Sequence[int], scheme: LabelScheme = DEFAULT_SCHEME) -> None:
    atomic_write_text(path, labels_to_text(labels, scheme))


def write_predictions(
    path: str | Path, records: Sequence[PredictionRecord], scheme: LabelScheme = DEFAULT_SCHEME
) -> None:
    """Write one label per frame; frame indices must run 0, 1, 2, ... without gaps."""
    for expected, rec in enumerate(records):
        if rec.frame_index != expected:
            raise ContiguityError(
                f"prediction records not contiguous: expected frame {expected}, got {rec.frame_index}"
            )
    atomic_write_text(path, labels_to_text((r.label for r in records), scheme))


# -- pipeline config ------------------------------------------------------------

PIPELINE_KEYS = ("coarse_models", "negative_models", "coarse_window", "negative_window", "smoothing_stage")


def parse_pipeline_config(text: str, source: str = "<config>") -> tuple[PipelineConfig, LabelScheme]:
    """Parse a pipeline config; scheme keys may optionally ride along.

    Example::

        coarse_models = [swin, ir152, hrnet]
        negative_models = [repvgg]
        coarse_window = 256
        negative_window = 256
        smoothing_stage = pre_fusion
    """
    kv = parse_key_values(text, source)
    allowed = set(PIPELINE_KEYS) | set(SCHEME_KEYS)
    for key, (_, lineno) in kv.items():
        if key not in allowed:
            raise ParseError(source, lineno, f"unknown key {key!r}")
    if "coarse_models" not in kv:
        raise ParseError(source, 1, "missing required key 'coarse_models'")

    def window(key: str) -> SmoothingConfig:
        if key not in kv:
            return SmoothingConfig(0)
        value, lineno = kv[key]
        try:
            return SmoothingConfig(int(value))
        except ValueError:
            raise ParseError(source, lineno, f"{key} must be a non-negative integer, got {value!r}") from None

    stage = SmoothingStage.PRE_FUSION
    if "smoothing_stage" in kv:
        value, lineno = kv["smoothing_stage"]
        try:
            stage = SmoothingStage(value.strip().lower())
        except ValueError:
            raise ParseError(source, lineno, "smoothing_stage must be pre_fusion or post_fusion") from None

    coarse_models = tuple(split_list(kv["coarse_models"][0]))
    if not coarse_models:
        raise ParseError(source, kv["coarse_models"][1], "coarse_models is empty")
    negative_models = tuple(split_list(kv["negative_models"][0])) if "negative_models" in kv else ()
    for models, key in ((coarse_models, "coarse_models"), (negative_models, "negative_models")):
        if len(set(models)) != len(models):
            raise ParseError(source, kv[key][1], f"{key} lists a model twice")

    scheme_values = {k: kv[k][0] for k in SCHEME_KEYS if k in kv}
    if scheme_values:
        scheme = scheme_from_mapping(scheme_values)
    else:
        scheme = DEFAULT_SCHEME
    cfg = PipelineConfig(coarse_models, negative_models, window("coarse_window"), window("negative_window"), stage)
    return cfg, scheme


def read_pipeline_config(path: str | Path) -> tuple[PipelineConfig, LabelScheme]:
    path = Path(path)
    lines = _read_lines(path)
    return parse_pipeline_config("\n".join(lines), str(path))


def pipeline_config_to_text(cfg: PipelineConfig) -> str:
    return (
        f"coarse_models = [{', '.join(cfg.coarse_models)}]\n"
        f"negative_models = [{', '.join(cfg.negative_models)}]\n"
        f"coarse_window = {cfg.coarse.window_w}\n"
        f"negative_window = {cfg.negative.window_w}\n"
        f"smoothing_stage = {cfg.smoothing_stage.value}\n"
    )
