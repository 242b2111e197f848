import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from cfcsp.errors import InvalidInputError, ShapeError
from cfcsp.smoothing import (
    RECOMPUTE_EVERY,
    SmoothingConfig,
    StreamingSmoother,
    VideoLogitStream,
    smooth_array,
    smooth_batch,
    streaming_flush,
    streaming_new,
    streaming_push,
    window_counts,
)


def _stream(x):
    return VideoLogitStream("v", "m", np.asarray(x, dtype=float).reshape(len(x), -1))


def _stream_all(x, w):
    s = StreamingSmoother(SmoothingConfig(w))
    return np.array(s.run(x)).reshape(np.shape(x))


def test_scalar_example_interior_and_boundary():
    out = smooth_batch(_stream([1, 2, 3, 4, 5]), SmoothingConfig(2)).frames.ravel()
    assert out[2] == 6.0  # 3 + (2+3+4)/3
    assert out[0] == 2.5  # 1 + (1+2)/2
    np.testing.assert_allclose(out, np.ravel(oracles.smooth_loop([[1], [2], [3], [4], [5]], 2)), atol=1e-15)


@pytest.mark.parametrize("w", [0, 1, 2, 3, 7, 64])
def test_matches_literal_loop(w):
    rng = np.random.default_rng(w)
    x = rng.normal(size=(40, 4))
    np.testing.assert_allclose(smooth_array(x, w), oracles.smooth_loop(x.tolist(), w), atol=1e-12)


@pytest.mark.parametrize("w", [1, 2, 5, 32, 1000])
def test_constant_doubles_exactly(w):
    c = np.array([0.1, -3.7, 1e6, 2.0 / 3.0, 0.0])
    x = np.tile(c, (57, 1))
    out = smooth_array(x, w)
    assert np.array_equal(out, np.tile(2 * c, (57, 1)))


def test_w0_is_identity_bitwise():
    x = np.random.default_rng(0).normal(size=(20, 5))
    out = smooth_batch(_stream(x), SmoothingConfig(0)).frames
    assert out.tobytes() == x.tobytes()
    assert out is not x


def test_w1_uses_only_the_frame_itself():
    x = np.random.default_rng(1).normal(size=(9, 3))
    np.testing.assert_allclose(smooth_array(x, 1), 2 * x, atol=1e-15)


def test_even_and_odd_share_half():
    x = np.random.default_rng(2).normal(size=(30, 2))
    np.testing.assert_array_equal(smooth_array(x, 4), smooth_array(x, 5))


def test_window_counts():
    np.testing.assert_array_equal(window_counts(5, 1), [2, 3, 3, 3, 2])
    np.testing.assert_array_equal(window_counts(3, 10), [3, 3, 3])


def test_empty_stream_is_not_an_error():
    out = smooth_batch(VideoLogitStream("v", "m", np.zeros((0, 5))), SmoothingConfig(8))
    assert out.n == 0


def test_non_uniform_width_is_shape_error():
    with pytest.raises(ShapeError):
        smooth_array(np.zeros(5), 2)
    with pytest.raises(ShapeError):
        VideoLogitStream("v", "m", [[1.0, 2.0], [3.0]])


def test_config_validation():
    with pytest.raises(ValueError):
        SmoothingConfig(-1)
    assert SmoothingConfig(256).half == 128


# -- streaming ------------------------------------------------------------------


def test_streaming_w0_emits_input_unchanged():
    s = streaming_new(SmoothingConfig(0))
    x = np.array([1.5, -2.0, 3.0])
    out = streaming_push(s, x)
    assert out is not None and np.array_equal(out, x)
    assert streaming_flush(s) == []


def test_streaming_w4_waits_for_context():
    s = streaming_new(SmoothingConfig(4))
    assert s.capacity == 5
    assert streaming_push(s, [1.0]) is None
    assert streaming_push(s, [2.0]) is None
    assert streaming_push(s, [3.0]) is not None  # position 0 has its full right context


def test_streaming_w2_five_pushes_plus_flush():
    x = np.arange(1.0, 6.0)[:, None]
    s = streaming_new(SmoothingConfig(2))
    outs = [streaming_push(s, f) for f in x]
    assert outs[0] is None  # W(0) = {0, 1} is complete after the second push
    np.testing.assert_array_equal(outs[1], [2.5])
    emitted = [o for o in outs if o is not None] + streaming_flush(s)
    assert len(emitted) == 5
    np.testing.assert_allclose(np.vstack(emitted), smooth_array(x, 2), atol=1e-12)


def test_streaming_flush_completes_short_stream():
    x = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_allclose(_stream_all(x, 2), smooth_array(x, 2), atol=1e-12)


def test_flush_without_pushes_and_twice():
    s = streaming_new(SmoothingConfig(6))
    assert streaming_flush(s) == []
    pushed = [s.push([float(v)]) for v in range(4)]
    emitted = [p for p in pushed if p is not None]
    assert len(emitted) + len(streaming_flush(s)) == 4
    assert streaming_flush(s) == []


def test_streaming_rejects_nan_and_keeps_state():
    s = streaming_new(SmoothingConfig(2))
    s.push([1.0, 2.0])
    with pytest.raises(InvalidInputError):
        s.push([np.nan, 0.0])
    assert s.pending == 1
    with pytest.raises(ShapeError):
        s.push([1.0, 2.0, 3.0])
    assert s.push([3.0, 4.0]) is not None
    assert len(s.flush()) == 1


def test_streaming_buffer_never_exceeds_capacity():
    s = streaming_new(SmoothingConfig(10))
    for i in range(100):
        s.push([float(i)])
        assert len(s._raw) <= s.capacity


def test_streaming_long_run_recompute_boundary():
    rng = np.random.default_rng(5)
    x = rng.normal(loc=50, scale=20, size=(3 * RECOMPUTE_EVERY + 17, 3))
    np.testing.assert_allclose(_stream_all(x, 33), smooth_array(x, 33), atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(0, 60), st.integers(1, 6)), elements=st.floats(-1e3, 1e3)),
    st.integers(0, 80),
)
def test_streaming_equals_batch(x, w):
    assert _stream_all(x, w).shape == x.shape
    np.testing.assert_allclose(_stream_all(x, w), smooth_array(x, w), atol=1e-9, rtol=1e-12)
