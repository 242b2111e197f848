import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import oracles
from cfcsp.cascade import PipelineConfig, predict_video
from cfcsp.errors import ParamsError, UndefinedFactorError
from cfcsp.metrics import macro_f1
from cfcsp.synthgen import (
    SynthParams,
    gen_corpus,
    gen_truth,
    gen_video,
    repeat_factors,
    resample_indices,
)
from cfcsp.taxonomy import DEFAULT_SCHEME

FIXTURES = Path(__file__).parent / "fixtures"


def _labels(video, cfg):
    return [r.label for r in predict_video(video.coarse_streams, video.negative_streams, cfg)]


def test_truth_is_piecewise_constant_within_range():
    p = SynthParams(seed=1, n_frames=5000, segment_len_range=(60, 300))
    truth = gen_truth(p)
    change = np.flatnonzero(np.diff(truth)) + 1
    bounds = np.concatenate([[0], change, [len(truth)]])
    lengths = np.diff(bounds)
    # adjacent segments may share a class, so runs are at least one segment long
    assert lengths[:-1].min() >= 60
    assert set(truth.tolist()) <= set(range(8))


def test_same_params_same_video():
    p = SynthParams(seed=99, n_frames=300)
    a, b = gen_video(p, ["x", "y"]), gen_video(p, ["x", "y"])
    assert np.array_equal(a.truth, b.truth)
    for sa, sb in zip(a.coarse_streams + a.negative_streams, b.coarse_streams + b.negative_streams):
        assert sa.frames.tobytes() == sb.frames.tobytes()


def test_model_noise_independent_of_model_list():
    p = SynthParams(seed=5, n_frames=200)
    a = gen_video(p, ["x", "y"])
    b = gen_video(p, ["y", "z", "x"])
    assert a.coarse_streams[0].frames.tobytes() == b.coarse_streams[2].frames.tobytes()


def test_noiseless_recovery():
    p = SynthParams(seed=2, n_frames=2000, noise_sigma=0.0, logit_gain=5.0)
    v = gen_video(p, ["a", "b", "c"])
    assert _labels(v, PipelineConfig(("a",), ("a",))) == v.truth.tolist()
    assert _labels(v, PipelineConfig(("a", "b", "c"), ("b",))) == v.truth.tolist()


@pytest.mark.parametrize("w", [8, 64, 256])
def test_noiseless_recovery_with_smoothing_away_from_boundaries(w):
    p = SynthParams(seed=3, n_frames=1500, noise_sigma=0.0, logit_gain=5.0)
    v = gen_video(p, ["a", "b"])
    labels = np.array(_labels(v, PipelineConfig(("a", "b"), ("a",)).with_window(w)))
    change = np.flatnonzero(np.diff(v.truth)) + 1
    near = np.zeros(len(v.truth), dtype=bool)
    for c in change:
        near[max(0, c - w // 2) : c + w // 2] = True
    assert np.array_equal(labels[~near], v.truth[~near])


def test_negative_stage_flat_on_non_negative_frames():
    v = gen_video(SynthParams(seed=4, n_frames=500, noise_sigma=0.0), ["a"])
    non_neg = ~np.isin(v.truth, [1, 2, 3, 5])
    assert not v.negative_streams[0].frames[non_neg].any()


def test_corpus_seeds_and_names():
    vids = gen_corpus(SynthParams(seed=7, n_frames=50), ["a"], 3)
    assert [v.video_id for v in vids] == ["video000", "video001", "video002"]
    solo = gen_video(SynthParams(seed=7 ^ 2, n_frames=50), ["a"], video_id="video002")
    assert np.array_equal(vids[2].truth, solo.truth)


@pytest.mark.parametrize(
    "bad",
    [
        dict(noise_sigma=-1.0),
        dict(segment_len_range=(10, 5)),
        dict(class_prior=(0.5, 0.5)),
        dict(model_decorrelation=1.5),
        dict(seed=-1),
    ],
)
def test_param_validation(bad):
    with pytest.raises(ParamsError):
        gen_video(replace(SynthParams(n_frames=10), **bad), ["a"])
    with pytest.raises(ParamsError):
        gen_video(SynthParams(n_frames=10), [])


def test_pinned_regression_anchor():
    anchor = json.loads((FIXTURES / "regression_anchor.json").read_text())
    params = SynthParams(
        seed=anchor["seed"],
        n_frames=anchor["n_frames"],
        noise_sigma=anchor["noise_sigma"],
        logit_gain=anchor["logit_gain"],
    )
    models = tuple(anchor["models"])
    v = gen_video(params, models)
    f1 = macro_f1(_labels(v, PipelineConfig(models, models).with_window(anchor["window"])), v.truth)
    assert f1 == pytest.approx(anchor["macro_f1"], abs=1e-12)


# -- repeat factors --------------------------------------------------------------


def test_repeat_factor_examples():
    t = 0.1
    np.testing.assert_array_equal(repeat_factors([t, 1 - t], t), [1.0, 1.0])
    r = repeat_factors([t / 4, 1 - t / 4], t)
    assert r[0] == 2.0
    assert r.tolist() == [oracles.repeat_factor(f, t) for f in [t / 4, 1 - t / 4]]
    assert (repeat_factors([0.25] * 4, 0.2) == 1.0).all()


def test_repeat_factor_errors():
    with pytest.raises(UndefinedFactorError):
        repeat_factors([0.0, 1.0], 0.1)
    with pytest.raises(ParamsError):
        repeat_factors([0.5, 0.5], 0.0)


def test_resample_balanced_is_permutation():
    labels = np.repeat(np.arange(4), 25)
    idx = resample_indices(labels, 0.2, seed=1)
    assert sorted(idx.tolist()) == list(range(100))


def test_resample_rate_matches_formula():
    rng = np.random.default_rng(0)
    labels = np.where(rng.random(10_000) < 0.1, 1, 0)
    idx = resample_indices(labels, 0.5, seed=3)
    freq_b = (labels == 1).mean()
    expected = math.sqrt(0.5 / freq_b)
    observed = np.isin(idx, np.flatnonzero(labels == 1)).sum() / (labels == 1).sum()
    assert abs(observed / expected - 1) < 0.05
    assert np.isin(idx, np.flatnonzero(labels == 0)).sum() == (labels == 0).sum()


def test_resample_deterministic():
    labels = np.random.default_rng(2).integers(0, 8, 1000)
    a = resample_indices(labels, 0.3, seed=9)
    b = resample_indices(labels, 0.3, seed=9)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != resample_indices(labels, 0.3, seed=10).tobytes()


def test_scheme_default_used():
    assert DEFAULT_SCHEME.negative_coarse_index == 1
