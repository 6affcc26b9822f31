import math
import random

import pytest

import quantkit as qk


def test_error_measures():
    assert qk.absolute_error(qk.PrevalenceVector(0.8, 0.2), qk.PrevalenceVector(0.6, 0.4)) == pytest.approx(0.2)
    rae = qk.relative_absolute_error(qk.PrevalenceVector(0.5, 0.5), qk.PrevalenceVector(0.4, 0.6), 500)
    assert rae == pytest.approx(0.19960, abs=1e-4)
    s = qk.smooth(qk.PrevalenceVector(1.0, 0.0), 0.001)
    assert s.pos + s.neg == pytest.approx(1.0)
    assert s.neg > 0


def test_invalid_prevalence_raises():
    with pytest.raises(qk.QuantkitError):
        qk.PrevalenceVector(0.7, 0.7)
    with pytest.raises(ValueError):
        qk.cc_quantify([])


def test_aggregative_quantifiers():
    assert qk.cc_quantify([1, 1, 0, 1]).pos == 0.75
    assert qk.pcc_quantify([0.9, 0.6, 0.3]).pos == pytest.approx(0.6)
    acc = qk.acc_quantify(qk.PrevalenceVector(0.6, 0.4), qk.ClassRates(0.8, 0.2))
    assert acc.pos == pytest.approx(2 / 3)
    pacc = qk.pacc_quantify(qk.PrevalenceVector(0.55, 0.45), qk.ClassRates(0.85, 0.25))
    assert pacc.pos == pytest.approx(0.5)
    assert qk.mlpe_quantify(qk.PrevalenceVector(0.3, 0.7)).pos == 0.3


def test_emq_and_hdy():
    rng = random.Random(1)
    post = []
    for _ in range(5000):
        x = rng.gauss(1.0 if rng.random() < 0.8 else -1.0, 1.0)
        post.append(1 / (1 + math.exp(-2 * x)))
    assert qk.emq_quantify(post, qk.PrevalenceVector(0.5, 0.5)).pos == pytest.approx(0.8, abs=0.03)

    pos = [rng.uniform(0.6, 1.0) for _ in range(200)]
    neg = [rng.uniform(0.0, 0.4) for _ in range(200)]
    test = pos * 3 + neg * 7
    assert qk.hdy_quantify(pos, neg, test).pos == pytest.approx(0.3, abs=0.02)


def test_sampling_is_exact_and_repeatable():
    labels = [1] * 300 + [0] * 700
    idx = qk.generate_indices(labels, 0.25, 100, 7)
    assert len(idx) == 100
    assert sum(labels[i] for i in idx) == qk.round_count(25.0)
    assert idx == qk.generate_indices(labels, 0.25, 100, 7)

    samples = qk.protocol_samples(labels, m=2, size=40, seed=3)
    assert len(samples) == 2 * len(qk.default_grid()) == 42
    for prevalence, sample in samples:
        assert sum(labels[i] for i in sample) == qk.round_count(prevalence * 40)


def test_tokenize():
    assert qk.tokenize("Great movie!!") == ["great", "movie"]
    assert qk.tokenize("The THE the") == []
    assert qk.is_stop_word("whereas")


def test_paired_ttest():
    v = qk.paired_ttest([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert v.t == pytest.approx(4.2426, abs=1e-3)
    assert v.p_value == pytest.approx(0.0132, abs=1e-3)
    assert v.symbol == "<"
    assert qk.student_t_two_sided(0.0, 10) == pytest.approx(1.0)


def test_grids():
    assert len(qk.grid_for("LR")) == 20
    assert len(qk.grid_for("MNB")) == 21


def _reviews(n, prevalence, seed):
    rng = random.Random(seed)
    good = ["superb", "moving", "brilliant", "delightful", "masterpiece"]
    bad = ["dull", "tedious", "awful", "clumsy", "boring"]
    neutral = ["plot", "actor", "scene", "camera", "score", "script"]
    texts, labels = [], []
    for _ in range(n):
        y = 1 if rng.random() < prevalence else 0
        words = [rng.choice(neutral) for _ in range(8)]
        words += [rng.choice(good if y else bad) for _ in range(3)]
        texts.append(" ".join(words))
        labels.append(y)
    return texts, labels


@pytest.mark.parametrize("method", ["CC", "ACC", "PCC", "PACC", "EMQ", "HDy", "MLPE"])
def test_text_quantifier(method):
    texts, labels = _reviews(400, 0.5, 11)
    q = qk.TextQuantifier(method=method, learner="LR", c=10.0, seed=5).fit(texts, labels)
    assert q.vocabulary_size > 0
    test_texts, test_labels = _reviews(300, 0.2, 12)
    est = q.quantify(test_texts)
    assert 0.0 <= est.pos <= 1.0
    if method != "MLPE":
        assert est.pos == pytest.approx(sum(test_labels) / len(test_labels), abs=0.1)


def test_text_quantifier_requires_fit():
    with pytest.raises(qk.QuantkitError, match="not fitted"):
        qk.TextQuantifier().quantify(["text"])
