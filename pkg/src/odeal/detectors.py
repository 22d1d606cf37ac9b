"""Outlier detectors (LOF, isolation forest, one-class SVM) and the
outlier-ranked construction of the initial labeled set.

Scores are oriented so that higher means more anomalous. All ranking ties
break toward the lower record index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidRateError,
    InvalidSizeError,
    SolverNotConvergedError,
    TooFewPointsError,
)
from .kernels import iforest_depths, knn_search

EULER_GAMMA = float(np.euler_gamma)
DISTANCE_FLOOR = 1e-12  # keeps duplicate points from collapsing densities

INIT_METHODS = ("random", "lof", "iforest", "ocsvm")


@dataclass(frozen=True)
class IForestConfig:
    n_estimators: int = 100
    subsample: int = 256
    seed: int = 0


@dataclass(frozen=True)
class LOFConfig:
    k_neighbors: int = 10


@dataclass(frozen=True)
class OCSVMConfig:
    gamma: float | None = None  # defaults to 1/d
    nu: float = 0.5
    train_subset_size: int = 1000
    tol: float = 1e-6
    max_iter: int = 200_000


@dataclass(frozen=True)
class DetectorConfig:
    iforest: IForestConfig = field(default_factory=IForestConfig)
    lof: LOFConfig = field(default_factory=LOFConfig)
    ocsvm: OCSVMConfig = field(default_factory=OCSVMConfig)
    contamination: float = 0.01

    def __post_init__(self):
        if self.lof.k_neighbors < 1:
            raise InvalidSizeError("lof k_neighbors must be >= 1")
        if not 0.0 < self.contamination < 0.5:
            raise InvalidRateError("contamination must be in (0, 0.5)")
        if self.ocsvm.gamma is not None and self.ocsvm.gamma <= 0:
            raise InvalidRateError("ocsvm gamma must be > 0")
        if not 0.0 < self.ocsvm.nu <= 1.0:
            raise InvalidRateError("ocsvm nu must be in (0, 1]")


@dataclass(frozen=True)
class OutlierScoreVector:
    """One score per pool instance; higher = more anomalous."""

    scores: np.ndarray
    detector_id: str

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(scores)):
            raise InvalidRateError(f"{self.detector_id}: non-finite outlier scores")
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return self.scores.shape[0]

    def top_indices(self, n: int) -> np.ndarray:
        """Indices of the n highest scores, ties broken by lower index."""
        order = np.lexsort((np.arange(len(self)), -self.scores))
        return order[:n]


# -- LOF ------------------------------------------------------------------


def lof_scores(X: np.ndarray, k: int = 10) -> OutlierScoreVector:
    """Local outlier factor: ratio of neighbor densities to own density.

    Uses exactly k neighbors (distance ties by lower index) and floors
    distances at DISTANCE_FLOOR so duplicates keep finite densities.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n <= k:
        raise TooFewPointsError(f"LOF needs more than k={k} points, got {n}")
    dist, idx = knn_search(X, X, k, exclude_self=True)
    dist = np.maximum(dist, DISTANCE_FLOOR)
    k_dist = dist[:, -1]
    reach = np.maximum(k_dist[idx], dist)
    lrd = 1.0 / reach.mean(axis=1)
    lof = lrd[idx].mean(axis=1) / lrd
    return OutlierScoreVector(scores=lof, detector_id=f"lof(k={k})")


# -- isolation forest -------------------------------------------------------


def average_path_length(n: int) -> float:
    """Expected unsuccessful-search path length in a random binary tree."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _build_isolation_tree(X: np.ndarray, rng: np.random.Generator, height_limit: int):
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    adjust: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        adjust.append(0.0)
        return len(feature) - 1

    def grow(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        if depth >= height_limit or rows.size <= 1:
            adjust[node] = average_path_length(rows.size)
            return node
        sub = X[rows]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        candidates = np.nonzero(hi > lo)[0]
        if candidates.size == 0:
            adjust[node] = average_path_length(rows.size)
            return node
        q = int(rng.choice(candidates))
        p = float(rng.uniform(lo[q], hi[q]))
        mask = sub[:, q] < p
        feature[node] = q
        threshold[node] = p
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0], dtype=np.intp), 0)
    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(adjust, dtype=np.float64),
    )


def iforest_scores(
    X: np.ndarray, cfg: IForestConfig = IForestConfig()
) -> OutlierScoreVector:
    """Isolation-forest anomaly score 2^(-E[h]/c(n)) over random subsamples.

    Per-tree seeds spawn deterministically from the master seed, so results
    do not depend on evaluation order or thread count.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 8:
        raise TooFewPointsError(f"isolation forest needs >= 8 points, got {n}")
    sub_n = min(cfg.subsample, n)
    height_limit = int(math.ceil(math.log2(max(sub_n, 2))))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_estimators)
    total = np.zeros(n, dtype=np.float64)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rows = rng.choice(n, size=sub_n, replace=False)
        tree = _build_isolation_tree(X[rows], rng, height_limit)
        total += iforest_depths(*tree, X)
    mean_depth = total / cfg.n_estimators
    scores = np.power(2.0, -mean_depth / average_path_length(sub_n))
    return OutlierScoreVector(
        scores=scores, detector_id=f"iforest(t={cfg.n_estimators},psi={sub_n})"
    )


# -- one-class SVM ----------------------------------------------------------


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for all pairs."""
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    d2 = a2[:, None] + b2[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass(frozen=True)
class OCSVMModel:
    support: np.ndarray  # training rows
    alpha: np.ndarray
    rho: float
    gamma: float
    kkt_residual: float
    iterations: int

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        K = rbf_kernel(self.support, np.asarray(X, dtype=np.float64), self.gamma)
        return self.alpha @ K - self.rho


def fit_ocsvm(X_train: np.ndarray, cfg: OCSVMConfig = OCSVMConfig()) -> OCSVMModel:
    """Solve the one-class dual min 1/2 a'Ka, 0 <= a_i <= 1/(nu n), sum a = 1
    by most-violating-pair coordinate updates."""
    X_train = np.asarray(X_train, dtype=np.float64)
    n = X_train.shape[0]
    if n < 2:
        raise TooFewPointsError(f"one-class SVM needs >= 2 points, got {n}")
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / X_train.shape[1]
    C = 1.0 / (cfg.nu * n)
    K = rbf_kernel(X_train, X_train, gamma)
    alpha = np.full(n, 1.0 / n)
    grad = K @ alpha
    eps = 1e-12
    residual = np.inf
    for iteration in range(cfg.max_iter):
        can_grow = alpha < C - eps
        can_shrink = alpha > eps
        if not can_grow.any() or not can_shrink.any():
            residual = 0.0
            break
        i = int(np.nonzero(can_grow)[0][np.argmin(grad[can_grow])])
        j = int(np.nonzero(can_shrink)[0][np.argmax(grad[can_shrink])])
        residual = grad[j] - grad[i]
        if residual <= cfg.tol:
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        step = residual / max(quad, 1e-12)
        step = min(step, C - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])
    else:
        raise SolverNotConvergedError(cfg.max_iter, float(residual))
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        rho = float(grad[free].mean())
    else:
        upper = grad[alpha >= C - eps]
        lower = grad[alpha <= eps]
        hi = upper.max() if upper.size else grad.min()
        lo = lower.min() if lower.size else grad.max()
        rho = float(0.5 * (hi + lo))
    return OCSVMModel(
        support=X_train.copy(),
        alpha=alpha,
        rho=rho,
        gamma=gamma,
        kkt_residual=float(max(residual, 0.0)),
        iterations=iteration,
    )


def ocsvm_scores(
    X_train: np.ndarray, X_eval: np.ndarray, cfg: OCSVMConfig = OCSVMConfig()
) -> OutlierScoreVector:
    """Negated decision function of an RBF one-class SVM (higher = anomalous)."""
    model = fit_ocsvm(X_train, cfg)
    scores = -model.decision_function(np.asarray(X_eval, dtype=np.float64))
    return OutlierScoreVector(scores=scores, detector_id=f"ocsvm(nu={cfg.nu})")


# -- pool scoring and initial-set construction -------------------------------


def score_pool(
    X: np.ndarray,
    method: str,
    cfg: DetectorConfig = DetectorConfig(),
    seed: int = 0,
) -> OutlierScoreVector:
    """Score every pool instance with the named detector.

    The one-class SVM trains on a random subset (cfg.ocsvm.train_subset_size)
    and scores the whole pool.
    """
    X = np.asarray(X, dtype=np.float64)
    if method == "lof":
        return lof_scores(X, cfg.lof.k_neighbors)
    if method == "iforest":
        return iforest_scores(X, cfg.iforest)
    if method == "ocsvm":
        n = X.shape[0]
        size = min(cfg.ocsvm.train_subset_size, n)
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n, size=size, replace=False))
        return ocsvm_scores(X[rows], X, cfg.ocsvm)
    raise InvalidSizeError(f"unknown detector {method!r}")


@dataclass(frozen=True)
class InitialSelection:
    initial_indices: np.ndarray
    unlabeled_indices: np.ndarray
    scores: OutlierScoreVector | None
    method: str


def build_initial_set(
    X_pool: np.ndarray,
    method: str,
    n_initial: int,
    cfg: DetectorConfig = DetectorConfig(),
    seed: int = 0,
) -> InitialSelection:
    """Partition the pool into the initial set and the unlabeled remainder.

    random: uniform sample. lof/iforest: top-n_initial scores. ocsvm: half
    random (doubles as the SVM training subset), half top-ranked among the
    remaining instances.
    """
    X_pool = np.asarray(X_pool, dtype=np.float64)
    n = X_pool.shape[0]
    if not 0 < n_initial < n:
        raise InvalidSizeError(f"n_initial must be in (0, {n}), got {n_initial}")
    rng = np.random.default_rng(seed)
    scores: OutlierScoreVector | None = None
    if method == "random":
        initial = np.sort(rng.choice(n, size=n_initial, replace=False))
    elif method in ("lof", "iforest"):
        scores = score_pool(X_pool, method, cfg, seed=seed)
        initial = scores.top_indices(n_initial)
    elif method == "ocsvm":
        half = n_initial // 2
        train_rows = np.sort(rng.choice(n, size=max(half, 2), replace=False))
        model = fit_ocsvm(X_pool[train_rows], cfg.ocsvm)
        scores = OutlierScoreVector(
            scores=-model.decision_function(X_pool),
            detector_id=f"ocsvm(nu={cfg.ocsvm.nu})",
        )
        remainder_mask = np.ones(n, dtype=bool)
        remainder_mask[train_rows] = False
        ranked = scores.top_indices(n)
        ranked = ranked[remainder_mask[ranked]][: n_initial - half]
        initial = np.concatenate([train_rows[:half], ranked])
    else:
        raise InvalidSizeError(f"unknown initial-set method {method!r}")
    in_initial = np.zeros(n, dtype=bool)
    in_initial[initial] = True
    unlabeled = np.nonzero(~in_initial)[0]
    return InitialSelection(
        initial_indices=np.asarray(initial, dtype=np.int64),
        unlabeled_indices=unlabeled.astype(np.int64),
        scores=scores,
        method=method,
    )


def anomalies_at_n(scores: OutlierScoreVector, labels, n: int) -> int:
    """True label-1 instances among the top-n ranked scores."""
    if n > len(scores):
        raise InvalidSizeError(f"cutoff {n} exceeds {len(scores)} scores")
    labels = np.asarray(labels)
    top = scores.top_indices(n)
    return int(np.sum(labels[top] == 1))


def threshold_predictions(
    scores: OutlierScoreVector, contamination: float
) -> np.ndarray:
    """Binary outlier predictions flagging the top contamination fraction."""
    if not 0.0 < contamination < 0.5:
        raise InvalidRateError("contamination must be in (0, 0.5)")
    n = len(scores)
    cut = int(math.floor(n * contamination + 0.5))
    pred = np.zeros(n, dtype=np.int64)
    pred[scores.top_indices(cut)] = 1
    return pred


def write_scores_csv(scores: OutlierScoreVector, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "score"])
        for i, s in enumerate(scores.scores):
            writer.writerow([i, repr(float(s))])
