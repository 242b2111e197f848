"""Coarse-to-fine expression prediction over per-frame logit files.

Subcommands: ``gen-synth``, ``predict``, ``eval``, ``sweep-window`` and
``sweep-ensemble``. Exit codes: 0 success, 1 usage error, 2 data or parse
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import dataio
from .cascade import DecidedBy, PipelineConfig, check_record, predict_video
from .errors import DataError, InvariantError, MissingFileError, ParamsError
from .metrics import ConfusionMatrix, confusion, f1_report, pooled_flip_rate, report_csv
from .smoothing import SmoothingConfig, VideoLogitStream, smooth_batch
from .synthgen import SynthParams, gen_corpus, label_frequencies, repeat_factors, resample_indices, write_corpus
from .taxonomy import DEFAULT_SCHEME, N_FINE, LabelScheme

log = logging.getLogger("cfcsp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); usage errors are 1 here
        raise UsageError(f"{self.prog}: {message}")


# -- corpus access -----------------------------------------------------------------


@dataclass
class Corpus:
    """Logit files of a directory, indexed by (video, stage, model)."""

    logits_dir: Path
    index: dict[tuple[str, str, str], Path] = field(default_factory=dict)

    @classmethod
    def open(cls, logits_dir: str | Path) -> "Corpus":
        return cls(Path(logits_dir), dataio.index_logits(logits_dir))

    @property
    def videos(self) -> list[str]:
        return sorted({v for v, _, _ in self.index})

    def models(self, stage: str) -> list[str]:
        return sorted({m for _, s, m in self.index if s == stage})

    def path(self, video: str, stage: str, model: str) -> Path:
        try:
            return self.index[(video, stage, model)]
        except KeyError:
            raise MissingFileError(
                f"missing {stage}-stage logits for video {video!r}, model {model!r} in {self.logits_dir}"
            ) from None


class StreamCache:
    """Per-video memo of loaded and smoothed streams.

    Smoothing depends only on (stream, window), so sweeps can reuse results
    across settings. ``enabled=False`` recomputes everything.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._loaded: dict[Path, VideoLogitStream] = {}
        self._smoothed: dict[tuple, VideoLogitStream] = {}

    def load(self, path: Path) -> VideoLogitStream:
        if not self.enabled:
            return dataio.read_logits(path)
        if path not in self._loaded:
            self._loaded[path] = dataio.read_logits(path)
        return self._loaded[path]

    def smooth(self, stream: VideoLogitStream, cfg: SmoothingConfig) -> VideoLogitStream:
        if not self.enabled:
            return smooth_batch(stream, cfg)
        key = (stream.video_id, stream.stage, stream.model_id, stream.k, cfg.window_w)
        if key not in self._smoothed:
            self._smoothed[key] = smooth_batch(stream, cfg)
        return self._smoothed[key]


def _predict_with(
    corpus: Corpus, video: str, cfg: PipelineConfig, scheme: LabelScheme, cache: StreamCache
) -> list:
    coarse = [cache.load(corpus.path(video, "coarse", m)) for m in cfg.coarse_models]

    def negatives() -> list[VideoLogitStream]:
        return [cache.load(corpus.path(video, "negative", m)) for m in cfg.negative_models]

    records = predict_video(coarse, negatives, cfg, scheme, smoother=cache.smooth)
    for r in records:
        check_record(r, scheme)
    return records


# Workers receive plain tuples so they pickle cleanly into a process pool.


def _predict_task(task) -> tuple[str, list[int], int]:
    logits_dir, index, video, cfg, scheme = task
    corpus = Corpus(Path(logits_dir), index)
    records = _predict_with(corpus, video, cfg, scheme, StreamCache())
    labels = [r.label for r in records]
    n_neg = sum(r.decided_by is DecidedBy.NEGATIVE_NET for r in records)
    return video, labels, n_neg


def _sweep_task(task) -> tuple[str, list[list[int]]]:
    logits_dir, index, video, cfgs, scheme, use_cache = task
    corpus = Corpus(Path(logits_dir), index)
    cache = StreamCache(enabled=use_cache)
    out = []
    for cfg in cfgs:
        out.append([r.label for r in _predict_with(corpus, video, cfg, scheme, cache)])
    return video, out


def _run_tasks(fn: Callable, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# -- helpers ---------------------------------------------------------------------


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_windows(value: str) -> list[int]:
    try:
        ws = [int(v) for v in _csv_list(value)]
    except ValueError:
        raise UsageError(f"--windows expects comma-separated integers, got {value!r}") from None
    if not ws:
        raise UsageError("--windows is empty")
    if any(w < 0 for w in ws):
        raise UsageError("window sizes must be >= 0")
    unique = sorted(set(ws))
    if len(unique) != len(ws):
        log.warning("duplicate window sizes removed: %s", ",".join(map(str, ws)))
    return unique


def _load_truths(annotations: Path, videos: Sequence[str], scheme: LabelScheme) -> dict[str, list[int]]:
    truths = {}
    for v in videos:
        p = annotations / f"{v}{dataio.LABEL_SUFFIX}"
        if not p.exists():
            raise MissingFileError(f"missing annotations for video {v!r}: {p}")
        truths[v] = dataio.read_annotations(p, scheme)
    return truths


def _score(preds: dict[str, list[int]], truths: dict[str, list[int]]) -> tuple[ConfusionMatrix, float]:
    cm = ConfusionMatrix(np.zeros((N_FINE, N_FINE), dtype=np.int64))
    for v in sorted(preds):
        if len(preds[v]) != len(truths[v]):
            raise DataError(f"video {v!r}: {len(preds[v])} predictions vs {len(truths[v])} annotations")
        cm = cm.merge(confusion(preds[v], truths[v], N_FINE))
    return cm, pooled_flip_rate([preds[v] for v in sorted(preds)])


def _rows_to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _out_file(out: str, default_name: str) -> Path:
    p = Path(out)
    if p.is_dir() or not p.suffix:
        return p / default_name
    return p


def _load_config(path: str) -> tuple[PipelineConfig, LabelScheme]:
    return dataio.read_pipeline_config(path)


# -- subcommands -----------------------------------------------------------------


def cmd_gen_synth(args) -> int:
    coarse = _csv_list(args.coarse_models)
    negative = _csv_list(args.negative_models) if args.negative_models else coarse
    if not coarse:
        raise UsageError("--coarse-models is empty")
    models = sorted(set(coarse) | set(negative))
    params = SynthParams(
        seed=args.seed,
        n_frames=args.frames,
        frame_rate=args.frame_rate,
        segment_len_range=(args.segment_min, args.segment_max),
        logit_gain=args.logit_gain,
        noise_sigma=args.noise_sigma,
        model_decorrelation=args.decorrelation,
    )
    try:
        params.validate()
        if not 0 < args.threshold_t <= 1:
            raise ParamsError(f"threshold must lie in (0, 1], got {args.threshold_t}")
    except ParamsError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    videos = gen_corpus(params, models, args.videos)
    write_corpus(out, videos)
    cfg = PipelineConfig(tuple(coarse), tuple(negative), SmoothingConfig(args.window), SmoothingConfig(args.window))
    dataio.atomic_write_text(out / "pipeline.cfg", dataio.pipeline_config_to_text(cfg))

    labels = np.concatenate([v.truth for v in videos]) if videos else np.zeros(0, dtype=np.int64)
    if labels.size:
        freqs = label_frequencies(labels)
        classes = sorted(freqs)
        factors = repeat_factors([freqs[c] for c in classes], args.threshold_t)
        rows = [[c, f"{freqs[c]:.6f}", f"{r:.6f}"] for c, r in zip(classes, factors.tolist())]
        dataio.atomic_write_text(out / "repeat_factors.csv", _rows_to_csv(["class", "frequency", "repeat_factor"], rows))
        idx = resample_indices(labels, args.threshold_t, args.seed)
        dataio.atomic_write_text(out / "resample_indices.txt", "".join(f"{i}\n" for i in idx.tolist()))
    print(f"videos={len(videos)} frames={int(labels.size)} models={','.join(models)} out={out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg, scheme = _load_config(args.config)
    if args.window is not None:
        cfg = cfg.with_window(args.window)
    corpus = Corpus.open(args.logits)
    videos = corpus.videos
    tasks = [(str(corpus.logits_dir), corpus.index, v, cfg, scheme) for v in videos]
    results = _run_tasks(_predict_task, tasks, args.jobs)
    out = Path(args.out)
    total = n_neg = 0
    for video, labels, neg in results:
        dataio.atomic_write_text(out / f"{video}{dataio.LABEL_SUFFIX}", dataio.labels_to_text(labels, scheme))
        total += len(labels)
        n_neg += neg
    frac_neg = n_neg / total if total else 0.0
    print(
        f"videos={len(results)} frames={total} "
        f"coarse_direct={1.0 - frac_neg if total else 0.0:.4f} negative_net={frac_neg:.4f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    scheme = _load_config(args.config)[1] if args.config else DEFAULT_SCHEME
    pred_dir, ann_dir = Path(args.predictions), Path(args.annotations)
    if not pred_dir.is_dir():
        raise MissingFileError(f"predictions directory not found: {pred_dir}")
    if not ann_dir.is_dir():
        raise MissingFileError(f"annotations directory not found: {ann_dir}")
    videos = sorted(p.stem for p in pred_dir.glob(f"*{dataio.LABEL_SUFFIX}"))
    missing = sorted(p.stem for p in ann_dir.glob(f"*{dataio.LABEL_SUFFIX}") if p.stem not in videos)
    if missing:
        raise MissingFileError(f"no predictions for annotated videos: {', '.join(missing)}")
    preds = {v: dataio.read_predictions(pred_dir / f"{v}{dataio.LABEL_SUFFIX}", scheme) for v in videos}
    truths = _load_truths(ann_dir, videos, scheme)
    cm, flips = _score(preds, truths)
    report = f1_report(cm)
    if args.out:
        dataio.atomic_write_text(_out_file(args.out, "report.csv"), report_csv(report, scheme.fine_names))
    print(f"macro_f1={report.macro:.4f} flip_rate={flips:.4f} frames={cm.total}")
    return EXIT_OK


def _sweep(args, cfgs: list[PipelineConfig], scheme: LabelScheme, corpus: Corpus):
    videos = corpus.videos
    truths = _load_truths(Path(args.annotations), videos, scheme)
    tasks = [(str(corpus.logits_dir), corpus.index, v, cfgs, scheme, not args.no_cache) for v in videos]
    results = dict(_run_tasks(_sweep_task, tasks, args.jobs))
    scores = []
    for i in range(len(cfgs)):
        preds = {v: results[v][i] for v in videos}
        cm, flips = _score(preds, truths)
        scores.append((f1_report(cm).macro, flips))
    return scores


def cmd_sweep_window(args) -> int:
    cfg, scheme = _load_config(args.config)
    windows = _parse_windows(args.windows)
    corpus = Corpus.open(args.logits)
    scores = _sweep(args, [cfg.with_window(w) for w in windows], scheme, corpus)
    rows = [[w, f"{f1:.4f}", f"{fr:.4f}"] for w, (f1, fr) in zip(windows, scores)]
    text = _rows_to_csv(["w", "macro_f1", "flip_rate"], rows)
    dataio.atomic_write_text(_out_file(args.out, "sweep_window.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def _subsets(values: list[str] | None, default: Sequence[str], flag: str, known: list[str]) -> list[tuple[str, ...]]:
    if not values:
        return [tuple(default)]
    subsets = []
    for v in values:
        names = tuple(_csv_list(v))
        if not names:
            raise UsageError(f"{flag}: empty model subset")
        unknown = [n for n in names if n not in known]
        if unknown:
            raise UsageError(f"{flag}: unknown model(s) {', '.join(unknown)}; known: {', '.join(known)}")
        subsets.append(tuple(sorted(set(names))))
    return subsets


def cmd_sweep_ensemble(args) -> int:
    cfg, scheme = _load_config(args.config)
    if args.window is not None:
        cfg = cfg.with_window(args.window)
    corpus = Corpus.open(args.logits)
    coarse_sets = _subsets(args.coarse_models, cfg.coarse_models, "--coarse-models", corpus.models("coarse"))
    negative_sets = _subsets(args.negative_models, cfg.negative_models, "--negative-models", corpus.models("negative"))
    if any(not s for s in coarse_sets):
        raise UsageError("--coarse-models: empty model subset")
    cfgs = [
        PipelineConfig(c, n, cfg.coarse, cfg.negative, cfg.smoothing_stage) for c in coarse_sets for n in negative_sets
    ]
    scores = _sweep(args, cfgs, scheme, corpus)
    rows = [["+".join(c.coarse_models), "+".join(c.negative_models), f"{f1:.4f}"] for c, (f1, _) in zip(cfgs, scores)]
    text = _rows_to_csv(["coarse_models", "negative_models", "macro_f1"], rows)
    dataio.atomic_write_text(_out_file(args.out, "sweep_ensemble.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def _non_negative(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(value: str) -> int:
    v = _non_negative(value)
    if v == 0:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfcsp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synth", help="write a synthetic corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=_non_negative, default=7)
    g.add_argument("--videos", type=_non_negative, default=20)
    g.add_argument("--frames", type=_non_negative, default=3000)
    g.add_argument("--frame-rate", type=float, default=30.0)
    g.add_argument("--segment-min", type=_positive, default=60)
    g.add_argument("--segment-max", type=_positive, default=300)
    g.add_argument("--logit-gain", type=float, default=2.0)
    g.add_argument("--noise-sigma", type=float, default=1.5)
    g.add_argument("--decorrelation", type=float, default=0.5)
    g.add_argument("--coarse-models", default="m1,m2,m3")
    g.add_argument("--negative-models", default=None)
    g.add_argument("--window", type=_non_negative, default=0)
    g.add_argument("--threshold-t", type=float, default=0.1)
    g.set_defaults(func=cmd_gen_synth)

    pr = sub.add_parser("predict", help="run the cascade over a logit directory")
    pr.add_argument("--config", required=True)
    pr.add_argument("--logits", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--window", type=_non_negative, default=None)
    pr.add_argument("--jobs", type=_positive, default=1)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="score prediction files against annotations")
    e.add_argument("--predictions", required=True)
    e.add_argument("--annotations", required=True)
    e.add_argument("--config", default=None)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    for name, func, help_ in (
        ("sweep-window", cmd_sweep_window, "macro-F1 and flip rate per window size"),
        ("sweep-ensemble", cmd_sweep_ensemble, "macro-F1 per coarse/negative model subset"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True)
        s.add_argument("--logits", required=True)
        s.add_argument("--annotations", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--jobs", type=_positive, default=1)
        s.add_argument("--no-cache", action="store_true")
        if name == "sweep-window":
            s.add_argument("--windows", required=True)
        else:
            s.add_argument("--window", type=_non_negative, default=None)
            s.add_argument("--coarse-models", action="append")
            s.add_argument("--negative-models", action="append")
        s.set_defaults(func=func)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s", level=logging.WARNING)
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - any other failure is an internal fault
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
