"""Quality-assessment classifiers: probabilistic KNN and a gradient-boosted
tree ensemble with logistic loss and optional class weighting.

Both expose predict_proba with P(0) + P(1) = 1. Training on a single class
is legal: the model is flagged degenerate and predicts that class with
probability 1 - 1e-6, which the active-learning engine treats as "blind"
rather than confident.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyTrainingSetError,
    InvalidSizeError,
)
from .kernels import knn_search, tree_build, tree_predict_raw

DEGENERATE_CLIP = 1e-6


@dataclass(frozen=True)
class KNNSpec:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise InvalidSizeError("knn k must be >= 1")


@dataclass(frozen=True)
class GBDTSpec:
    n_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    class_weighting: bool = True
    l2_reg: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidSizeError("gbdt needs at least one tree")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidSizeError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise InvalidSizeError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "gbdt"
    knn: KNNSpec = field(default_factory=KNNSpec)
    gbdt: GBDTSpec = field(default_factory=GBDTSpec)

    def __post_init__(self):
        if self.kind not in ("knn", "gbdt"):
            raise InvalidSizeError(f"unknown classifier kind {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ClassifierSpec":
        return cls(
            kind=payload.get("kind", "gbdt"),
            knn=KNNSpec(**payload.get("knn", {})),
            gbdt=GBDTSpec(**payload.get("gbdt", {})),
        )


def sigmoid(raw):
    return 1.0 / (1.0 + np.exp(-np.asarray(raw, dtype=np.float64)))


def gbdt_gradients(p: float, y: int, w: float = 1.0) -> tuple[float, float]:
    """Gradient and hessian of the weighted logistic loss w.r.t. the raw score."""
    return w * (p - y), w * p * (1.0 - p)


def class_weights(y: np.ndarray) -> dict[int, float]:
    """Balanced weights: n / (2 * count(class))."""
    n = len(y)
    counts = {c: int(np.sum(y == c)) for c in (0, 1)}
    return {c: (n / (2.0 * counts[c]) if counts[c] else 0.0) for c in (0, 1)}


def _validate_training_inputs(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-D, got shape {X.shape}")
    if len(X) != len(y):
        raise DimensionMismatchError(f"{len(X)} rows vs {len(y)} labels")
    if len(X) == 0:
        raise EmptyTrainingSetError("cannot fit on an empty training set")
    if np.any((y != 0) & (y != 1)):
        raise DimensionMismatchError("labels must be 0 or 1")
    return X.copy(), y.copy()


class _BaseModel:
    spec: ClassifierSpec
    degenerate: bool = False
    _single_class: int | None = None

    def _degenerate_proba(self, n: int) -> np.ndarray:
        p1 = 1.0 - DEGENERATE_CLIP if self._single_class == 1 else DEGENERATE_CLIP
        p1 = np.full(n, p1)
        return np.column_stack([1.0 - p1, p1])

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


class KNNModel(_BaseModel):
    def __init__(self, spec: ClassifierSpec, X: np.ndarray, y: np.ndarray):
        self.spec = spec
        self._X = X
        self._y = y
        classes = np.unique(y)
        self.degenerate = len(classes) < 2
        self._single_class = int(classes[0]) if self.degenerate else None

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self._X.shape[1]:
            raise DimensionMismatchError(
                f"expected {self._X.shape[1]} features, got {X.shape[1]}"
            )
        if self.degenerate:
            return self._degenerate_proba(len(X))
        k = min(self.spec.knn.k, len(self._X))
        _, idx = knn_search(X, self._X, k, exclude_self=False)
        p1 = self._y[idx].mean(axis=1)
        return np.column_stack([1.0 - p1, p1])

    def to_json_dict(self) -> dict:
        return {
            "kind": "knn",
            "k": self.spec.knn.k,
            "n_train": int(len(self._X)),
            "degenerate": self.degenerate,
        }


class GBDTModel(_BaseModel):
    def __init__(self, spec: ClassifierSpec, X: np.ndarray, y: np.ndarray):
        self.spec = spec
        g = spec.gbdt
        classes = np.unique(y)
        self.degenerate = len(classes) < 2
        self._single_class = int(classes[0]) if self.degenerate else None
        self._n_features = X.shape[1]
        self._trees: list[tuple] = []
        self.train_losses: list[float] = []
        if self.degenerate:
            self._base_score = 0.0
            return
        weights = class_weights(y)
        w = np.where(y == 1, weights[1], weights[0])
        base_rate = float(np.sum(w * y) / np.sum(w))
        self._base_score = math.log(base_rate / (1.0 - base_rate))
        raw = np.full(len(y), self._base_score)
        for _ in range(g.n_trees):
            p = sigmoid(raw)
            self.train_losses.append(self._weighted_loss(p, y, w))
            grad = w * (p - y)
            hess = w * p * (1.0 - p)
            tree = tree_build(
                X, grad, hess, g.max_depth, g.min_samples_leaf, g.l2_reg
            )
            self._trees.append(tree)
            raw = raw + g.learning_rate * tree_predict_raw(*tree, X)
        self.train_losses.append(self._weighted_loss(sigmoid(raw), y, w))

    @staticmethod
    def _weighted_loss(p, y, w) -> float:
        p = np.clip(p, 1e-15, 1.0 - 1e-15)
        ce = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
        return float(np.sum(w * ce) / np.sum(w))

    def predict_raw(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self._n_features:
            raise DimensionMismatchError(
                f"expected {self._n_features} features, got {X.shape[1]}"
            )
        raw = np.full(len(X), self._base_score)
        for tree in self._trees:
            raw += self.spec.gbdt.learning_rate * tree_predict_raw(*tree, X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        if self.degenerate:
            X = np.ascontiguousarray(X, dtype=np.float64)
            return self._degenerate_proba(len(X))
        p1 = sigmoid(self.predict_raw(X))
        return np.column_stack([1.0 - p1, p1])

    def to_json_dict(self) -> dict:
        def node(tree, i) -> dict:
            feature, threshold, left, right, value = tree
            if feature[i] < 0:
                return {"leaf": float(value[i])}
            return {
                "feature": int(feature[i]),
                "threshold": float(threshold[i]),
                "left": node(tree, int(left[i])),
                "right": node(tree, int(right[i])),
            }

        return {
            "kind": "gbdt",
            "base_score": self._base_score,
            "learning_rate": self.spec.gbdt.learning_rate,
            "degenerate": self.degenerate,
            "trees": [node(tree, 0) for tree in self._trees],
        }


def fit(spec: ClassifierSpec, X, y):
    """Train a classifier; inputs are copied, never mutated."""
    X, y = _validate_training_inputs(X, y)
    if spec.kind == "knn":
        return KNNModel(spec, X, y)
    return GBDTModel(spec, X, y)
