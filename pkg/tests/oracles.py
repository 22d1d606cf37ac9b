"""Independent brute-force implementations used to cross-check the package.

Everything here is written straight from the textbook definitions with plain
loops, deliberately ignoring how the package computes the same quantities.
"""

import math

import numpy as np

DISTANCE_FLOOR = 1e-12


def brute_force_lof(X, k):
    """Definitional LOF: k-distance, reachability distance, local reachability
    density, then the mean density ratio over the k nearest neighbors.

    Neighbor ties break toward the lower index; distances are floored so
    duplicated points keep finite densities.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    d = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            d[a, b] = max(math.dist(X[a], X[b]), DISTANCE_FLOOR)

    def neighbors(a):
        others = sorted((d[a, b], b) for b in range(n) if b != a)
        return [b for _, b in others[:k]]

    knn = [neighbors(a) for a in range(n)]
    k_dist = [d[a, knn[a][-1]] for a in range(n)]

    def reach_dist(a, b):
        return max(k_dist[b], d[a, b])

    lrd = [
        1.0 / (sum(reach_dist(a, b) for b in knn[a]) / k)
        for a in range(n)
    ]
    return np.array([
        sum(lrd[b] / lrd[a] for b in knn[a]) / k
        for a in range(n)
    ])


def brute_force_knn_proba(X_train, y_train, X_eval, k):
    """All-pairs KNN vote fraction with (distance, index) ordering."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_eval = np.asarray(X_eval, dtype=np.float64)
    y_train = np.asarray(y_train)
    out = np.zeros(len(X_eval))
    for i, x in enumerate(X_eval):
        order = sorted(
            range(len(X_train)),
            key=lambda j: (float(np.sum((X_train[j] - x) ** 2)), j),
        )
        votes = [y_train[j] for j in order[:k]]
        out[i] = sum(votes) / len(votes)
    return out


def weighted_logistic_loss(raw_score, y, w):
    """w * cross-entropy of sigmoid(raw_score) against y."""
    p = 1.0 / (1.0 + math.exp(-raw_score))
    return -w * (y * math.log(p) + (1 - y) * math.log(1.0 - p))


def analytic_loss_gradient(raw_score, y, w):
    """First derivative of the weighted logistic loss (itself checked against
    the centered difference of the loss before being used for the hessian)."""
    p = 1.0 / (1.0 + math.exp(-raw_score))
    return w * (p - y)


def finite_difference_gradients(raw_score, y, w, eps=1e-5):
    """Centered-difference first and second derivatives of the weighted
    logistic loss.

    The second derivative uses the centered difference of the first
    derivative; a double difference of the loss itself cannot reach 1e-6
    relative accuracy in float64 at this step size.
    """
    lo = weighted_logistic_loss(raw_score - eps, y, w)
    hi = weighted_logistic_loss(raw_score + eps, y, w)
    g = (hi - lo) / (2 * eps)
    h = (
        analytic_loss_gradient(raw_score + eps, y, w)
        - analytic_loss_gradient(raw_score - eps, y, w)
    ) / (2 * eps)
    return g, h


def brute_force_f1(pairs):
    """F1 for the positive class from raw (prediction, truth) pairs."""
    tp = sum(1 for p, t in pairs if p == 1 and t == 1)
    fp = sum(1 for p, t in pairs if p == 1 and t == 0)
    fn = sum(1 for p, t in pairs if p == 0 and t == 1)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def top_n_by_score(scores, n):
    """Sort-based selection oracle: highest scores first, index breaks ties."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:n]
