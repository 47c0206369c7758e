"""Adversary-strength metrics: correlation and user re-identification.

The attacker model is simple on purpose: per-user per-day pattern
vectors (event counts per time-of-day bucket), compared with Pearson
correlation or fed to a k-nearest-neighbors / linear SVM classifier that
tries to tell two users apart. The SVM is a plain hinge-loss
subgradient descent with L2 regularization on z-scored features;
hyperparameters are fixed so runs are reproducible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SECONDS_PER_DAY, Event


class ConstantVectorError(ValueError):
    """Pearson correlation is undefined for a constant input vector."""


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    ssa = float(da @ da)
    ssb = float(db @ db)
    if ssa == 0.0 or ssb == 0.0:
        raise ConstantVectorError("correlation undefined for a constant vector")
    return float((da @ db) / np.sqrt(ssa * ssb))


def pearson_or_zero(a: Sequence[float], b: Sequence[float]) -> tuple[float, bool]:
    """Pipeline-friendly variant: (0.0, False) when undefined, meaning
    'no linear information'."""
    try:
        return pearson(a, b), True
    except ConstantVectorError:
        return 0.0, False


def bucket_day_counts(
    stamped: Sequence[tuple[int, str]], n: int, days: int
) -> dict[str, np.ndarray]:
    """(timestamp, user) pairs -> per-user (days, n) count matrices."""
    out: dict[str, np.ndarray] = {}
    for ts, user in stamped:
        mat = out.setdefault(user, np.zeros((days, n)))
        day, tod = divmod(ts, SECONDS_PER_DAY)
        if day < days:
            mat[day, tod * n // SECONDS_PER_DAY] += 1
    return out


def event_daily_vectors(events: Sequence[Event], n: int, days: int) -> dict[str, np.ndarray]:
    return bucket_day_counts([(ev.timestamp, ev.user) for ev in events], n, days)


@dataclass
class LabeledVectorSet:
    """Pattern vectors with user labels, one vector per user-day."""

    vectors: np.ndarray  # (N, n)
    labels: list[str]

    def __post_init__(self) -> None:
        if len(self.vectors) != len(self.labels):
            raise ValueError("vectors and labels disagree in length")

    @classmethod
    def from_daily(cls, per_user: dict[str, np.ndarray]) -> "LabeledVectorSet":
        chunks = []
        labels: list[str] = []
        for user in sorted(per_user):
            mat = per_user[user]
            chunks.append(mat)
            labels.extend([user] * len(mat))
        return cls(np.vstack(chunks), labels)

    def class_count(self) -> int:
        return len(set(self.labels))

    def split(self, test_frac: float, seed: int) -> tuple["LabeledVectorSet", "LabeledVectorSet"]:
        """Stratified train/test split, seeded."""
        rng = np.random.default_rng(seed)
        train_idx: list[int] = []
        test_idx: list[int] = []
        labels = np.asarray(self.labels)
        for user in sorted(set(self.labels)):
            idx = np.flatnonzero(labels == user)
            idx = rng.permutation(idx)
            cut = int(round(len(idx) * test_frac))
            test_idx.extend(idx[:cut])
            train_idx.extend(idx[cut:])
        train_idx.sort()
        test_idx.sort()
        return (
            LabeledVectorSet(self.vectors[train_idx], [self.labels[i] for i in train_idx]),
            LabeledVectorSet(self.vectors[test_idx], [self.labels[i] for i in test_idx]),
        )


def knn_classify(
    train: LabeledVectorSet, test_vectors: np.ndarray, k: int = 5
) -> list[str]:
    """Euclidean-distance majority vote. k should be odd to avoid ties
    on two-class problems; remaining ties break toward the nearer class."""
    if len(train.vectors) == 0:
        raise ValueError("empty training set")
    if k > len(train.vectors):
        raise ValueError(f"k={k} exceeds training size {len(train.vectors)}")
    test_vectors = np.atleast_2d(np.asarray(test_vectors, dtype=float))
    diffs = test_vectors[:, None, :] - train.vectors[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    predictions = []
    labels = np.asarray(train.labels)
    for row in dists:
        nearest = np.argsort(row, kind="stable")[:k]
        votes = Counter(labels[nearest])
        top = votes.most_common()
        best = [lbl for lbl, cnt in top if cnt == top[0][1]]
        if len(best) == 1:
            predictions.append(best[0])
        else:
            sums = {lbl: row[nearest][labels[nearest] == lbl].sum() for lbl in best}
            predictions.append(min(sorted(best), key=lambda lbl: sums[lbl]))
    return predictions


def accuracy(predicted: Sequence[str], truth: Sequence[str]) -> float:
    if len(predicted) != len(truth):
        raise ValueError("length mismatch")
    if not truth:
        raise ValueError("empty evaluation set")
    return sum(p == t for p, t in zip(predicted, truth)) / len(truth)


class LinearSVM:
    """Two-class linear SVM: subgradient descent on the hinge loss with
    L2 regularization (eta_t = 1 / (lam * t)), features z-scored from the
    training split. The intercept rides along as a constant feature so
    every coordinate shares the same decayed update. Deterministic under
    the seed."""

    def __init__(self, lam: float = 1e-3, epochs: int = 200, seed: int = 0):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.classes_: list[str] = []
        self.w: np.ndarray | None = None  # last coordinate is the intercept
        self._mean: np.ndarray | None = None
        self._std: np.ndarray | None = None

    def _design(self, vectors: np.ndarray) -> np.ndarray:
        X = (np.atleast_2d(np.asarray(vectors, dtype=float)) - self._mean) / self._std
        return np.hstack([X, np.ones((len(X), 1))])

    def fit(self, vectors: np.ndarray, labels: Sequence[str]) -> "LinearSVM":
        self.classes_ = sorted(set(labels))
        if len(self.classes_) != 2:
            raise ValueError(f"need exactly 2 classes, got {len(self.classes_)}")
        X = np.asarray(vectors, dtype=float)
        self._mean = X.mean(axis=0)
        std = X.std(axis=0)
        self._std = np.where(std > 0, std, 1.0)
        X = self._design(vectors)
        y = np.where(np.asarray(labels) == self.classes_[1], 1.0, -1.0)

        rng = np.random.default_rng(self.seed)
        w = np.zeros(X.shape[1])
        t = 0
        for _ in range(self.epochs):
            for i in rng.permutation(len(X)):
                t += 1
                eta = 1.0 / (self.lam * t)
                if y[i] * (X[i] @ w) < 1.0:
                    w = (1.0 - eta * self.lam) * w + eta * y[i] * X[i]
                else:
                    w = (1.0 - eta * self.lam) * w
        self.w = w
        return self

    def decision(self, vectors: np.ndarray) -> np.ndarray:
        return self._design(vectors) @ self.w

    def predict(self, vectors: np.ndarray) -> list[str]:
        scores = self.decision(vectors)
        return [self.classes_[1] if s >= 0 else self.classes_[0] for s in scores]


def svm_train(train: LabeledVectorSet, lam: float = 1e-3, epochs: int = 200, seed: int = 0) -> LinearSVM:
    return LinearSVM(lam=lam, epochs=epochs, seed=seed).fit(train.vectors, train.labels)


def svm_classify(model: LinearSVM, test_vectors: np.ndarray) -> list[str]:
    return model.predict(test_vectors)


def interception_vector(u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Estimated per-bucket pass-through probability f_i / u_i, clamped to
    [0, 1], defined as 0 where the raw stream had no events."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(u > 0, f / np.where(u > 0, u, 1.0), 0.0)
    return np.clip(p, 0.0, 1.0)


def leak_budget(f: np.ndarray, d: np.ndarray) -> float:
    """Unmaskable per-day excess where the target dips below the pattern."""
    return float(np.maximum(np.asarray(f) - np.asarray(d), 0.0).sum())
