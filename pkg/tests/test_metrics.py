import csv
import io

import numpy as np
import pytest

import oracles
from cfcsp.errors import AlignmentError, EmptyInputError, InvalidLabelError
from cfcsp.metrics import (
    ConfusionMatrix,
    confusion,
    f1_report,
    flip_rate,
    macro_f1,
    pooled_flip_rate,
    report_csv,
)


def test_confusion_diagonal():
    cm = confusion([0, 1], [0, 1], 2)
    np.testing.assert_array_equal(cm.counts, [[1, 0], [0, 1]])
    assert cm.total == 2


def test_confusion_excludes_invalid_truth():
    cm = confusion([1], [-1], 2)
    assert cm.total == 0 and not cm.counts.any()


def test_confusion_hand_count():
    cm = confusion([0, 0, 1], [0, 1, 1], 2)
    assert cm.counts.tolist() == oracles.confusion_tally([0, 0, 1], [0, 1, 1], 2) == [[1, 0], [1, 1]]


def test_confusion_errors():
    with pytest.raises(AlignmentError):
        confusion([0, 1], [0], 2)
    with pytest.raises(InvalidLabelError):
        confusion([-1], [0], 2)
    with pytest.raises(InvalidLabelError):
        confusion([0], [5], 2)


def test_f1_perfect_and_all_wrong():
    assert f1_report(confusion([0, 1, 2, 3, 4, 5, 6, 7], list(range(8)), 8)).macro == 1.0
    assert f1_report(confusion([1, 0, 3, 2], [0, 1, 2, 3], 8)).macro == 0.0


def test_f1_two_class_example():
    rep = f1_report(confusion([0, 0, 1], [0, 1, 1], 2))
    per, macro = oracles.f1_fractions([[1, 0], [1, 1]])
    np.testing.assert_allclose(rep.per_class, [float(p) for p in per], atol=1e-15)
    assert rep.macro == pytest.approx(float(macro), abs=1e-15)
    assert rep.macro == pytest.approx(2 / 3, abs=1e-15)
    assert rep.support.tolist() == [1, 2]


def test_zero_support_class_counts_in_mean():
    # only class 0 appears; the other 7 classes score 0
    rep = f1_report(confusion([0, 0], [0, 0], 8))
    assert rep.per_class[0] == 1.0 and rep.macro == pytest.approx(1 / 8)


def test_merge_is_entrywise_and_commutative():
    rng = np.random.default_rng(0)
    a = confusion(rng.integers(0, 8, 50), rng.integers(-1, 8, 50), 8)
    b = confusion(rng.integers(0, 8, 70), rng.integers(-1, 8, 70), 8)
    c = confusion(rng.integers(0, 8, 30), rng.integers(-1, 8, 30), 8)
    assert np.array_equal((a + b).counts, (b + a).counts)
    assert np.array_equal(((a + b) + c).counts, (a + (b + c)).counts)


def test_pair_order_and_relabeling_invariance():
    rng = np.random.default_rng(1)
    p, t = rng.integers(0, 8, 200), rng.integers(-1, 8, 200)
    perm = rng.permutation(200)
    assert macro_f1(p[perm], t[perm]) == macro_f1(p, t)
    relabel = rng.permutation(8)
    t2 = np.where(t >= 0, relabel[np.clip(t, 0, 7)], -1)
    assert macro_f1(relabel[p], t2) == pytest.approx(macro_f1(p, t), abs=1e-15)


@pytest.mark.parametrize(
    "labels, expected", [("AAAA", 0.0), ("ABAB", 1.0), ("AABBB", 0.25), ("A", 0.0)]
)
def test_flip_rate(labels, expected):
    assert flip_rate(list(labels)) == expected


def test_flip_rate_empty():
    with pytest.raises(EmptyInputError):
        flip_rate([])


def test_pooled_flip_rate():
    assert pooled_flip_rate([[0, 1], [2, 2, 2]]) == pytest.approx(1 / 3)


def test_report_csv_layout():
    names = ["a", "b"]
    rows = list(csv.reader(io.StringIO(report_csv(f1_report(confusion([0, 0, 1], [0, 1, 1], 2)), names))))
    assert rows[0] == ["class", "precision", "recall", "f1", "support"]
    assert rows[1] == ["a", "0.5000", "1.0000", "0.6667", "1"]
    assert rows[2] == ["b", "1.0000", "0.5000", "0.6667", "2"]
    assert rows[3][0] == "macro" and rows[3][3] == "0.6667"


def test_confusion_matrix_validation():
    with pytest.raises(ValueError):
        ConfusionMatrix(np.array([[1, -1], [0, 0]]))
