"""Downstream XSS detector: char n-gram TF-IDF + random forest.

The classifier is deliberately self-contained (no ML framework): the
feature weighting, split procedure, and forest are pinned down to the
draw, so identical seeds give identical models on any machine.  Positive
class is always "malicious".
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._rng import SplitMix64, mix
from .corpus import Payload

CONDITIONS = ("original", "augmented_all", "augmented_valid")

_POS = "malicious"
_NEG = "benign"


@dataclass(frozen=True)
class VectorizerConfig:
    n_min: int = 3
    n_max: int = 5
    max_features: int | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.n_min <= self.n_max):
            raise ValueError("need 1 <= n_min <= n_max")


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.trees < 1:
            raise ValueError("trees must be >= 1")


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 < self.test_fraction < 1):
            raise ValueError("test_fraction must be in (0, 1)")


@dataclass(frozen=True)
class MetricQuad:
    accuracy: Fraction
    precision: Fraction
    recall: Fraction
    f1: Fraction
    degenerate: bool = False


def char_ngrams(doc: str, n_min: int, n_max: int) -> Counter:
    """Raw counts of contiguous character substrings of lengths n_min..n_max."""
    counts: Counter = Counter()
    for n in range(n_min, n_max + 1):
        for i in range(len(doc) - n + 1):
            counts[doc[i : i + n]] += 1
    return counts


class Vectorizer:
    """TF-IDF over character n-grams.  tf is the raw in-document count,
    idf(t) = ln((1+N)/(1+df(t))) + 1, rows L2-normalized, grams outside the
    fitted vocabulary dropped at transform time."""

    def __init__(self, config: VectorizerConfig | None = None):
        self.config = config or VectorizerConfig()
        self.vocabulary_: dict[str, int] = {}
        self.idf_: np.ndarray | None = None

    def fit(self, docs: list[str]) -> "Vectorizer":
        if not docs:
            raise ValueError("cannot fit on an empty document list")
        cfg = self.config
        df: Counter = Counter()
        total: Counter = Counter()
        for doc in docs:
            counts = char_ngrams(doc, cfg.n_min, cfg.n_max)
            total.update(counts)
            df.update(counts.keys())
        grams = sorted(df)
        if cfg.max_features is not None and len(grams) > cfg.max_features:
            grams = sorted(
                grams, key=lambda g: (-total[g], g))[: cfg.max_features]
            grams.sort()
        self.vocabulary_ = {g: i for i, g in enumerate(grams)}
        n_docs = len(docs)
        self.idf_ = np.array(
            [math.log((1 + n_docs) / (1 + df[g])) + 1.0 for g in grams], dtype=np.float64
        )
        return self

    def transform(self, docs: list[str]) -> np.ndarray:
        if self.idf_ is None:
            raise ValueError("vectorizer is not fitted")
        cfg = self.config
        X = np.zeros((len(docs), len(self.vocabulary_)), dtype=np.float64)
        for row, doc in enumerate(docs):
            for gram, tf in char_ngrams(doc, cfg.n_min, cfg.n_max).items():
                col = self.vocabulary_.get(gram)
                if col is not None:
                    X[row, col] = tf * self.idf_[col]
            norm = np.linalg.norm(X[row])
            if norm > 0:
                X[row] /= norm
        return X

    def fit_transform(self, docs: list[str]) -> np.ndarray:
        return self.fit(docs).transform(docs)


def vectorize_fit(
    train_docs: list[str], config: VectorizerConfig | None = None
) -> tuple[Vectorizer, np.ndarray]:
    vec = Vectorizer(config)
    return vec, vec.fit_transform(train_docs)


def stratified_split(
    payloads: list[Payload], config: SplitConfig
) -> tuple[list[Payload], list[Payload]]:
    """Seeded shuffle within each class, then per-class test counts of
    round(class_count * fraction), adjusted by at most 1 per class to hit
    round(total * fraction) exactly."""
    frac = Fraction(str(config.test_fraction))
    by_label = {_NEG: [], _POS: []}
    for p in payloads:
        by_label[p.label].append(p)
    for label, members in by_label.items():
        if len(members) < 2:
            raise ValueError(f"class {label!r} needs >= 2 members, has {len(members)}")
    target_total = round(len(payloads) * frac)
    counts = {label: round(len(members) * frac) for label, members in by_label.items()}
    labels_desc = sorted(by_label, key=lambda l: -len(by_label[l]))
    diff = target_total - sum(counts.values())
    for label in labels_desc:
        if diff == 0:
            break
        step = 1 if diff > 0 else -1
        adjusted = counts[label] + step
        if 1 <= adjusted < len(by_label[label]):
            counts[label] = adjusted
            diff -= step
    train: list[Payload] = []
    test: list[Payload] = []
    for class_idx, label in enumerate(sorted(by_label)):
        members = list(by_label[label])
        SplitMix64(mix(config.seed, class_idx)).shuffle(members)
        k = counts[label]
        test.extend(members[:k])
        train.extend(members[k:])
    return train, test


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray


@dataclass
class ForestModel:
    trees: list[_Tree] = field(default_factory=list)

    def predict(self, X: np.ndarray) -> list[str]:
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += _predict_tree(tree, X)
        # strict majority for malicious; ties fall to benign
        return [_POS if v * 2 > len(self.trees) else _NEG for v in votes]


def _predict_tree(tree: _Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int64)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        f = feat[rows]
        go_left = X[rows, f] <= tree.threshold[node[rows]]
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])
    return tree.label[node]


def _best_split(
    X: np.ndarray, idx: np.ndarray, ys: np.ndarray, feats: list[int]
) -> tuple[int, float] | None:
    n = len(idx)
    if n < 2:
        return None
    pos = int(ys.sum())
    p = pos / n
    parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    if parent <= 0.0:
        return None
    sub = X[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(sub, order, axis=0)
    prefix_pos = np.cumsum(ys[order], axis=0)
    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    left_pos = prefix_pos[:-1, :].astype(np.float64)
    right_n = n - left_n
    right_pos = pos - left_pos
    with np.errstate(invalid="ignore", divide="ignore"):
        pl = left_pos / left_n
        pr = right_pos / right_n
        gini_l = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
        gini_r = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
        weighted = (left_n * gini_l + right_n * gini_r) / n
    weighted[sorted_vals[:-1, :] >= sorted_vals[1:, :]] = np.inf
    flat = int(np.argmin(weighted))
    best = weighted.flat[flat]
    if not np.isfinite(best) or best >= parent - 1e-12:
        return None
    i, j = np.unravel_index(flat, weighted.shape)
    thr = (sorted_vals[i, j] + sorted_vals[i + 1, j]) / 2.0
    return feats[j], float(thr)


def _build_tree(X: np.ndarray, y: np.ndarray, rng: SplitMix64, k_features: int) -> _Tree:
    n, n_features = X.shape
    boot = np.array([rng.below(n) for _ in range(n)], dtype=np.int64)
    all_feats = list(range(n_features))
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    label: list[int] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(0)
        return len(feature) - 1

    stack: list[tuple[np.ndarray, int]] = [(boot, new_node())]
    while stack:
        idx, node_id = stack.pop()
        ys = y[idx]
        pos = int(ys.sum())
        if pos == 0 or pos == len(ys):
            label[node_id] = 1 if pos else 0
            continue
        feats = rng.sample(all_feats, k_features)
        split = _best_split(X, idx, ys, feats)
        if split is None:
            # majority label; exact tie falls to benign
            label[node_id] = 1 if pos * 2 > len(ys) else 0
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        left_id = new_node()
        right_id = new_node()
        feature[node_id] = f
        threshold[node_id] = thr
        left[node_id] = left_id
        right[node_id] = right_id
        stack.append((idx[mask], left_id))
        stack.append((idx[~mask], right_id))
    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        label=np.array(label, dtype=np.int64),
    )


def train(X: np.ndarray, labels: list[str], config: ForestConfig) -> ForestModel:
    """Bagged Gini trees over floor(sqrt(F)) seeded feature subsets per node;
    per-tree seed = mix(config.seed, tree_index)."""
    if len(X) != len(labels):
        raise ValueError("feature matrix and labels disagree in length")
    y = np.array([1 if lab == _POS else 0 for lab in labels], dtype=np.int64)
    if y.sum() == 0 or y.sum() == len(y):
        raise ValueError("training data must contain both classes")
    n_features = X.shape[1]
    k = max(1, min(n_features, int(math.isqrt(n_features))))
    model = ForestModel()
    for t in range(config.trees):
        rng = SplitMix64(mix(config.seed, t))
        model.trees.append(_build_tree(X, y, rng, k))
    return model


def metrics(predictions: list[str], truths: list[str]) -> MetricQuad:
    """Accuracy, precision, recall, f1 with positive = malicious, as exact
    ratios.  Degenerate zero-denominator cases are defined (not crashed)
    and flagged."""
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not predictions:
        raise ValueError("empty evaluation set")
    tp = fp = fn = tn = 0
    for pred, truth in zip(predictions, truths):
        if truth == _POS:
            if pred == _POS:
                tp += 1
            else:
                fn += 1
        else:
            if pred == _POS:
                fp += 1
            else:
                tn += 1
    total = tp + fp + fn + tn
    accuracy = Fraction(tp + tn, total)
    degenerate = False
    if tp + fp == 0:
        degenerate = True
        precision = Fraction(1) if tp + fn == 0 else Fraction(0)
    else:
        precision = Fraction(tp, tp + fp)
    if tp + fn == 0:
        degenerate = True
        recall = Fraction(1)
    else:
        recall = Fraction(tp, tp + fn)
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = Fraction(0)
    return MetricQuad(accuracy, precision, recall, f1, degenerate)


def run_conditions(
    original: list[Payload],
    generated_all: list[str],
    generated_valid: list[str],
    vec_config: VectorizerConfig,
    split_config: SplitConfig,
    forest_config: ForestConfig,
) -> list[tuple[str, MetricQuad]]:
    """Three training conditions over one fixed split: original only, plus
    all generated, plus behavior-valid generated only.  Augmentation joins
    the training side only, so every condition sees the identical test set."""
    base_train, test = stratified_split(original, split_config)
    test_docs = [p.text for p in test]
    test_labels = [p.label for p in test]
    rows: list[tuple[str, MetricQuad]] = []
    for condition, extra in zip(CONDITIONS, ([], generated_all, generated_valid)):
        extra_payloads = [Payload.make(text, _POS) for text in extra]
        train_set = base_train + extra_payloads
        vec = Vectorizer(vec_config)
        X_train = vec.fit_transform([p.text for p in train_set])
        model = train(X_train, [p.label for p in train_set], forest_config)
        preds = model.predict(vec.transform(test_docs))
        rows.append((condition, metrics(preds, test_labels)))
    return rows


def write_metrics_csv(rows: list[tuple[str, MetricQuad]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("condition,accuracy,precision,recall,f1\n")
        for condition, quad in rows:
            fh.write(
                f"{condition},{float(quad.accuracy):.4f},{float(quad.precision):.4f},"
                f"{float(quad.recall):.4f},{float(quad.f1):.4f}\n"
            )
