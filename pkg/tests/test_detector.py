"""Feature extraction, stratified splitting, the hand-rolled forest, and
metric arithmetic."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from payloadforge.corpus import Payload
from payloadforge.detector import (
    CONDITIONS,
    ForestConfig,
    MetricQuad,
    SplitConfig,
    Vectorizer,
    VectorizerConfig,
    char_ngrams,
    metrics,
    run_conditions,
    stratified_split,
    train,
    write_metrics_csv,
)


def brute_force_count(doc: str, gram: str) -> int:
    return sum(1 for i in range(len(doc) - len(gram) + 1) if doc[i : i + len(gram)] == gram)


def test_char_ngrams_against_brute_force():
    docs = ["abcabc", "<script>alert(1)</script>", "aaaa", "xy"]
    for doc in docs:
        counts = char_ngrams(doc, 3, 5)
        for n in range(3, 6):
            grams = {doc[i : i + n] for i in range(len(doc) - n + 1)}
            for gram in grams:
                assert counts[gram] == brute_force_count(doc, gram)
        assert all(3 <= len(g) <= 5 for g in counts)
        assert sum(counts.values()) == sum(
            max(len(doc) - n + 1, 0) for n in range(3, 6)
        )


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=30))
def test_char_ngrams_property(doc):
    counts = char_ngrams(doc, 3, 5)
    for gram, c in counts.items():
        assert c == brute_force_count(doc, gram)


def test_vectorizer_config_validation():
    with pytest.raises(ValueError):
        VectorizerConfig(n_min=0)
    with pytest.raises(ValueError):
        VectorizerConfig(n_min=4, n_max=3)


def test_tfidf_frozen_oracle():
    # two documents, 3-grams only, weights computed by hand:
    # vocab [aaa, aab, abb], df [1, 2, 1], idf ln((1+2)/(1+df))+1
    vec = Vectorizer(VectorizerConfig(n_min=3, n_max=3))
    X = vec.fit_transform(["aaab", "aabb"])
    assert list(vec.vocabulary_) == ["aaa", "aab", "abb"]
    np.testing.assert_allclose(
        vec.idf_, [1.4054651081081644, 1.0, 1.4054651081081644], rtol=0, atol=1e-15
    )
    np.testing.assert_allclose(
        X,
        [
            [0.8148024746671689, 0.5797386715376657, 0.0],
            [0.0, 0.5797386715376657, 0.8148024746671689],
        ],
        rtol=0,
        atol=1e-15,
    )


def test_transform_rows_are_l2_normalized():
    vec = Vectorizer(VectorizerConfig())
    X = vec.fit_transform(["<script>alert(1)</script>", "hello world text"])
    norms = np.linalg.norm(X, axis=1)
    np.testing.assert_allclose(norms, [1.0, 1.0], atol=1e-12)


def test_transform_drops_out_of_vocabulary_grams():
    vec = Vectorizer(VectorizerConfig(n_min=3, n_max=3))
    vec.fit(["aaab"])
    X = vec.transform(["zzzz"])
    assert not X.any()
    # unfitted transform is an error
    with pytest.raises(ValueError):
        Vectorizer().transform(["x"])
    with pytest.raises(ValueError):
        Vectorizer().fit([])


def test_max_features_keeps_most_frequent():
    # total counts: aaa appears 2x in doc1 + 2x in doc3, aab 1x, abb 1x ...
    vec = Vectorizer(VectorizerConfig(n_min=3, n_max=3, max_features=2))
    vec.fit(["aaaa", "aabb", "aaab"])
    assert len(vec.vocabulary_) == 2
    assert "aaa" in vec.vocabulary_
    # vocabulary indices stay sorted by gram after the cut
    grams = list(vec.vocabulary_)
    assert grams == sorted(grams)


def _payloads(n_mal: int, n_ben: int):
    mal = [Payload.make(f"<script>alert({i})</script>", "malicious") for i in range(n_mal)]
    ben = [Payload.make(f"plain text number {i}", "benign") for i in range(n_ben)]
    return mal + ben


def test_stratified_split_counts_and_determinism():
    payloads = _payloads(24, 16)
    train_set, test_set = stratified_split(payloads, SplitConfig(0.2, seed=3))
    assert len(test_set) == 8
    assert len(train_set) == 32
    assert sum(1 for p in test_set if p.label == "malicious") == 5
    t2, s2 = stratified_split(payloads, SplitConfig(0.2, seed=3))
    assert (t2, s2) == (train_set, test_set)
    assert stratified_split(payloads, SplitConfig(0.2, seed=4)) != (train_set, test_set)
    # no payload lost or duplicated
    assert sorted(p.id for p in train_set + test_set) == sorted(p.id for p in payloads)


def test_stratified_split_corpus_scale_counts():
    # class sizes from the reference corpus: test side must come out exactly
    payloads = _payloads(24185, 13420)
    _, test_set = stratified_split(payloads, SplitConfig(0.2, seed=0))
    mal = sum(1 for p in test_set if p.label == "malicious")
    ben = len(test_set) - mal
    assert (mal, ben) == (4837, 2684)
    assert len(test_set) == round(37605 * 0.2)


def test_stratified_split_rounding_adjustment():
    # 3 malicious + 3 benign at 0.25: per-class round gives 1+1 = 2,
    # total round(6 * 0.25) = 2, no drift; at 0.5: 2+2 == round(3.0)... use
    # a case with real drift: 5+5 at 0.25 rounds to 1+1 but needs 2? no:
    # round(10*0.25)=2=1+1. Drift case: 3+3 at 0.5 -> per-class 2+2=4 vs
    # round(3.0)=3, so one class gives a member back.
    payloads = _payloads(3, 3)
    train_set, test_set = stratified_split(payloads, SplitConfig(0.5, seed=1))
    assert len(test_set) == 3
    assert len(train_set) == 3
    by_label = {"malicious": 0, "benign": 0}
    for p in test_set:
        by_label[p.label] += 1
    assert sorted(by_label.values()) == [1, 2]


def test_stratified_split_rejects_tiny_classes():
    with pytest.raises(ValueError):
        stratified_split(_payloads(1, 5), SplitConfig(0.2, seed=0))
    with pytest.raises(ValueError):
        SplitConfig(0.0)
    with pytest.raises(ValueError):
        SplitConfig(1.0)


# ------------------------------------------------------------------ forest


def _toy_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 6))
    labels = ["malicious" if x > 0.5 else "benign" for x in X[:, 2]]
    return X, labels


def test_forest_learns_separable_data():
    X, labels = _toy_data()
    model = train(X, labels, ForestConfig(trees=30, seed=7))
    assert model.predict(X) == labels


def test_forest_deterministic():
    X, labels = _toy_data()
    a = train(X, labels, ForestConfig(trees=10, seed=1)).predict(X)
    b = train(X, labels, ForestConfig(trees=10, seed=1)).predict(X)
    assert a == b


def test_forest_generalizes():
    X, labels = _toy_data(80, seed=1)
    X2, labels2 = _toy_data(40, seed=2)
    model = train(X, labels, ForestConfig(trees=40, seed=3))
    preds = model.predict(X2)
    accuracy = sum(p == t for p, t in zip(preds, labels2)) / len(labels2)
    assert accuracy >= 0.9


def test_forest_constant_features_fall_to_majority():
    X = np.zeros((10, 3))
    labels = ["malicious"] * 7 + ["benign"] * 3
    model = train(X, labels, ForestConfig(trees=15, seed=2))
    preds = model.predict(np.zeros((4, 3)))
    assert preds == ["malicious"] * 4


def test_forest_tie_votes_fall_to_benign():
    from payloadforge.detector import ForestModel, _Tree

    def leaf(label: int) -> _Tree:
        return _Tree(
            feature=np.array([-1]),
            threshold=np.array([0.0]),
            left=np.array([-1]),
            right=np.array([-1]),
            label=np.array([label]),
        )

    model = ForestModel(trees=[leaf(1), leaf(0)])
    assert model.predict(np.zeros((1, 2))) == ["benign"]
    model = ForestModel(trees=[leaf(1), leaf(1), leaf(0)])
    assert model.predict(np.zeros((1, 2))) == ["malicious"]


def test_train_input_validation():
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        train(X, ["malicious"] * 3, ForestConfig())
    with pytest.raises(ValueError):
        train(X, ["malicious"] * 4, ForestConfig())
    with pytest.raises(ValueError):
        ForestConfig(trees=0)


# ------------------------------------------------------------------ metrics


def test_metrics_quad_arithmetic():
    preds = ["malicious"] * 9 + ["benign"] + ["benign"] * 9 + ["malicious"]
    truth = ["malicious"] * 10 + ["benign"] * 10
    quad = metrics(preds, truth)
    assert quad == MetricQuad(
        Fraction(18, 20), Fraction(9, 10), Fraction(9, 10), Fraction(9, 10), False
    )


def test_metrics_perfect():
    quad = metrics(["malicious", "benign"], ["malicious", "benign"])
    assert quad.f1 == 1
    assert not quad.degenerate


def test_metrics_degenerate_no_positive_predictions():
    quad = metrics(["benign", "benign"], ["malicious", "benign"])
    assert quad.degenerate
    assert quad.precision == 0
    assert quad.recall == 0
    assert quad.f1 == 0


def test_metrics_degenerate_no_positives_at_all():
    quad = metrics(["benign", "benign"], ["benign", "benign"])
    assert quad.degenerate
    assert quad.precision == 1
    assert quad.recall == 1
    assert quad.accuracy == 1


def test_metrics_validation():
    with pytest.raises(ValueError):
        metrics(["benign"], [])
    with pytest.raises(ValueError):
        metrics([], [])


# ----------------------------------------------------------- conditions


def test_run_conditions_shapes_and_augmentation_effect(tmp_path):
    payloads = _payloads(30, 30)
    rows = run_conditions(
        payloads,
        generated_all=["<script>alert(900)</script>", "junk <<<"],
        generated_valid=["<script>alert(901)</script>"],
        vec_config=VectorizerConfig(),
        split_config=SplitConfig(0.2, seed=5),
        forest_config=ForestConfig(trees=10, seed=6),
    )
    assert [name for name, _ in rows] == list(CONDITIONS)
    for _, quad in rows:
        assert 0 <= float(quad.f1) <= 1

    csv_path = tmp_path / "metrics.csv"
    write_metrics_csv(rows, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "condition,accuracy,precision,recall,f1"
    assert len(lines) == 4
    for line in lines[1:]:
        fields = line.split(",")
        assert len(fields) == 5
        for value in fields[1:]:
            float(value)
            assert len(value.split(".")[1]) == 4


def test_run_conditions_deterministic():
    payloads = _payloads(20, 20)
    kwargs = dict(
        generated_all=["<script>x('1')</script>"],
        generated_valid=[],
        vec_config=VectorizerConfig(),
        split_config=SplitConfig(0.2, seed=1),
        forest_config=ForestConfig(trees=8, seed=2),
    )
    assert run_conditions(payloads, **kwargs) == run_conditions(payloads, **kwargs)
