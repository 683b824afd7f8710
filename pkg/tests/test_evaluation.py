from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chomp.errors import ConfigError
from chomp.evaluation import aggregate, confusion_matrix, score_fold, split_protocol


def corpus(n_subjects=4, foods=("apple", "carrot", "chips"), per=6, n_other=10):
    subj, food, lab = [], [], []
    for s in range(n_subjects):
        for f in foods:
            for i in range(per):
                subj.append(f"S{s:02d}")
                food.append(f)
                lab.append(i % 2)
        for _ in range(n_other):
            subj.append(f"S{s:02d}")
            food.append(None)
            lab.append(2)
    return np.array(subj, dtype=object), food, np.array(lab)


def test_loso_folds():
    s, f, y = corpus()
    folds = split_protocol(s, f, y, "loso")
    assert [x.key for x in folds] == ["S00", "S01", "S02", "S03"]
    for x in folds:
        assert np.intersect1d(x.train, x.test).size == 0
        assert set(s[x.test]) == {x.key} and x.key not in set(s[x.train])
        assert x.train.size + x.test.size == y.size


def test_lofo_folds():
    s, f, y = corpus()
    folds = split_protocol(s, f, y, "LOFO", seed=3)
    assert [x.key for x in folds] == ["apple", "carrot", "chips"]
    fa = np.array([v or "" for v in f], dtype=object)
    for x in folds:
        assert np.intersect1d(x.train, x.test).size == 0
        chew_test = x.test[y[x.test] != 2]
        assert set(fa[chew_test]) == {x.key}
        assert x.key not in set(fa[x.train[y[x.train] != 2]])
        other_test = x.test[y[x.test] == 2]
        # 20 % of each subject's non-chewing windows
        assert other_test.size == 4 * 2
        for subj in set(s):
            assert np.sum(s[other_test] == subj) == 2
    a = split_protocol(s, f, y, "lofo", seed=3)
    assert all(np.array_equal(p.test, q.test) for p, q in zip(folds, a))


def test_protocol_errors():
    s, f, y = corpus(n_subjects=1)
    with pytest.raises(ConfigError):
        split_protocol(s, f, y, "loso")
    with pytest.raises(ConfigError):
        split_protocol(s, f, y, "kfold")
    with pytest.raises(ConfigError):
        split_protocol(s, ["apple"] * len(y), y, "lofo")


def test_perfect_and_degenerate():
    y = np.array([0, 1, 2, 2, 1, 0])
    assert score_fold(y, y).macro_f1 == 1.0
    r = score_fold(np.zeros(6, dtype=int), np.zeros(6, dtype=int))
    # classes absent from both predictions and truth score 0
    assert r.per_class_f1 == (1.0, 0.0, 0.0) and r.macro_f1 == pytest.approx(1 / 3)
    assert score_fold(np.array([1, 1]), np.array([0, 0])).macro_f1 == 0.0


def test_confusion_orientation():
    cm = confusion_matrix([1, 1, 2], [0, 1, 2])
    assert cm.tolist() == [[0, 1, 0], [0, 1, 0], [0, 0, 1]]


def test_label_checks():
    with pytest.raises(ConfigError):
        score_fold([0, 1], [0])
    with pytest.raises(ConfigError):
        score_fold([0, 3], [0, 1])


def test_aggregate_quantiles():
    y = np.array([0, 1, 2, 0, 1])
    reps = [score_fold(y, y, "a"), score_fold(np.array([0, 1, 2, 0, 0]), y, "b")]
    agg = aggregate(reps)
    f = sorted(r.macro_f1 for r in reps)
    assert agg.median_f1 == pytest.approx(np.mean(f))
    assert agg.q1 == pytest.approx(f[0] + 0.25 * (f[1] - f[0]))
    assert agg.confusion.sum() == 10
    with pytest.raises(ConfigError):
        aggregate([])


def test_type7_values():
    base = score_fold(np.array([0, 1, 2]), np.array([0, 1, 2]))
    agg = aggregate([replace(base, fold_key=k, macro_f1=v) for k, v in (("a", 0.8), ("b", 0.9))])
    assert (agg.median_f1, agg.q1, agg.q3) == pytest.approx((0.85, 0.825, 0.875))


labels_st = st.lists(st.integers(0, 2), min_size=1, max_size=60)


@given(labels_st, st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_f1_bounds_and_permutation(labels, rnd):
    y = np.array(labels)
    p = np.array([rnd.randint(0, 2) for _ in labels])
    r = score_fold(p, y)
    assert 0.0 <= r.macro_f1 <= 1.0
    perm = np.array(rnd.sample(range(len(y)), len(y)))
    assert score_fold(p[perm], y[perm]).macro_f1 == r.macro_f1
    assert r.confusion.sum() == len(y)


@given(labels_st, st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_matches_reference_metrics(labels, rnd):
    metrics = pytest.importorskip("sklearn.metrics")
    y = np.array(labels)
    p = np.array([rnd.randint(0, 2) for _ in labels])
    ref = metrics.f1_score(y, p, labels=[0, 1, 2], average="macro", zero_division=0)
    assert score_fold(p, y).macro_f1 == pytest.approx(ref, abs=1e-12)
