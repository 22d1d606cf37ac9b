"""Pool-based active learning engine.

A session partitions its pool into the initial set, the labeled set, and the
unlabeled set, warms a classifier up on the outlier-ranked initial set, then
alternates entropy-based (or random) querying with full refits until the
label budget is exhausted or every unlabeled prediction falls below the
confidence threshold.

The session is driven stepwise (pending batch -> submit labels), so the same
engine serves both the simulated oracle and the HTTP annotation service.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    Dataset,
    FeatureScaler,
    SplitSpec,
    encode_features,
    fit_scaler,
    stratified_split,
)
from .detectors import (
    INIT_METHODS,
    DetectorConfig,
    OutlierScoreVector,
    build_initial_set,
    score_pool,
)
from .errors import (
    AuditError,
    BudgetSmallerThanInitialSetError,
    EmptyUnlabeledSetError,
    ExternalTimeoutError,
    InvalidSizeError,
    LabelSubmissionError,
    NotFittedError,
    UnknownIndexError,
    WrongPhaseError,
)
from .kernels import BACKEND
from .metrics import f1_from_predictions
from .models import ClassifierSpec, fit

STRATEGIES = ("uncertainty", "random")
PHASE_AWAITING = "awaiting_labels"
PHASE_TRAINING = "training"
PHASE_DONE = "done"


def entropy(p1):
    """Binary prediction entropy in nats, with 0*ln(0) = 0.

    Both terms use the same plain-log expression, so p and 1-p produce
    bit-identical entropies whenever both are representable (the tie rule
    "H(p) = H(1-p), lower index wins" then holds exactly).
    """
    arr = np.asarray(p1, dtype=np.float64)
    comp = 1.0 - arr
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(arr > 0.0, arr * np.log(arr), 0.0)
        right = np.where(comp > 0.0, comp * np.log(comp), 0.0)
    h = np.maximum(-(left + right), 0.0)
    return float(h) if np.isscalar(p1) else h


@dataclass(frozen=True)
class QueryBatch:
    """Instances awaiting labels, most informative first (ties: lower index)."""

    indices: tuple[int, ...]
    scores: tuple[float, ...]
    kind: str = "query"  # "initial" or "query"

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class PoolState:
    """Disjoint partition of the pool, plus the labels bought so far."""

    initial: tuple[int, ...]
    labeled: tuple[int, ...]
    unlabeled: tuple[int, ...]
    acquired: dict

    @property
    def pool_size(self) -> int:
        return len(self.initial) + len(self.labeled) + len(self.unlabeled)


@dataclass(frozen=True)
class BudgetLedger:
    n_initial: int
    n_queried: int
    budget: int
    confidence_tau: float

    @property
    def spent(self) -> int:
        return self.n_initial + self.n_queried


@dataclass(frozen=True)
class SessionConfig:
    classifier: ClassifierSpec
    n_initial: int
    budget: int
    init_method: str = "lof"
    k_per_cycle: int = 1
    confidence_tau: float = 0.05
    strategy: str = "uncertainty"
    seed: int = 0
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    oracle: str = "simulated"
    split: str = "auto"  # "auto" = 60/20/20 with the session seed, "none" = no holdout
    fallback_detector: str = "lof"  # ranks queries while the model is single-class

    def __post_init__(self):
        if self.init_method not in INIT_METHODS:
            raise InvalidSizeError(f"unknown init method {self.init_method!r}")
        if self.strategy not in STRATEGIES:
            raise InvalidSizeError(f"unknown strategy {self.strategy!r}")
        if self.k_per_cycle < 1:
            raise InvalidSizeError("k_per_cycle must be >= 1")
        if self.n_initial < 1:
            raise InvalidSizeError("n_initial must be >= 1")
        if self.budget < self.n_initial:
            raise BudgetSmallerThanInitialSetError(
                f"budget {self.budget} < initial set size {self.n_initial}"
            )
        if self.split not in ("auto", "none"):
            raise InvalidSizeError("split must be 'auto' or 'none'")
        if self.fallback_detector not in ("lof", "iforest", "ocsvm", "none"):
            raise InvalidSizeError(
                f"unknown fallback detector {self.fallback_detector!r}"
            )

    def to_dict(self) -> dict:
        det = self.detectors
        return {
            "classifier": self.classifier.to_dict(),
            "n_initial": self.n_initial,
            "budget": self.budget,
            "init_method": self.init_method,
            "k_per_cycle": self.k_per_cycle,
            "confidence_tau": self.confidence_tau,
            "strategy": self.strategy,
            "seed": self.seed,
            "detectors": {
                "iforest": {
                    "n_estimators": det.iforest.n_estimators,
                    "subsample": det.iforest.subsample,
                    "seed": det.iforest.seed,
                },
                "lof": {"k_neighbors": det.lof.k_neighbors},
                "ocsvm": {
                    "gamma": det.ocsvm.gamma,
                    "nu": det.ocsvm.nu,
                    "train_subset_size": det.ocsvm.train_subset_size,
                    "tol": det.ocsvm.tol,
                    "max_iter": det.ocsvm.max_iter,
                },
                "contamination": det.contamination,
            },
            "oracle": self.oracle,
            "split": self.split,
            "fallback_detector": self.fallback_detector,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SessionConfig":
        from .detectors import IForestConfig, LOFConfig, OCSVMConfig

        det = payload.get("detectors", {})
        detectors = DetectorConfig(
            iforest=IForestConfig(**det.get("iforest", {})),
            lof=LOFConfig(**det.get("lof", {})),
            ocsvm=OCSVMConfig(**det.get("ocsvm", {})),
            contamination=det.get("contamination", 0.01),
        )
        return cls(
            classifier=ClassifierSpec.from_dict(payload["classifier"]),
            n_initial=payload["n_initial"],
            budget=payload["budget"],
            init_method=payload.get("init_method", "lof"),
            k_per_cycle=payload.get("k_per_cycle", 1),
            confidence_tau=payload.get("confidence_tau", 0.05),
            strategy=payload.get("strategy", "uncertainty"),
            seed=payload.get("seed", 0),
            detectors=detectors,
            oracle=payload.get("oracle", "simulated"),
            split=payload.get("split", "auto"),
            fallback_detector=payload.get("fallback_detector", "lof"),
        )


@dataclass
class PreparedPool:
    """Split, scaled, and optionally pre-scored view of a dataset.

    Experiments reuse one of these across paired sessions so both arms see
    the identical pool and cached detector scores.
    """

    pool: Dataset
    holdout: Dataset
    X_pool: np.ndarray
    X_holdout: np.ndarray
    scaler: FeatureScaler
    score_cache: dict[str, OutlierScoreVector] = field(default_factory=dict)


def prepare_pool(
    dataset: Dataset,
    split: SplitSpec | None,
    eval_dataset: Dataset | None = None,
) -> PreparedPool:
    """Split off the held-out test subset and z-score on pool statistics."""
    if split is not None:
        pool, _, holdout = stratified_split(dataset, split)
    else:
        pool = dataset
        holdout = eval_dataset if eval_dataset is not None else dataset
    scaler = fit_scaler(encode_features(pool.records))
    X_pool = scaler.transform(encode_features(pool.records))
    X_holdout = scaler.transform(encode_features(holdout.records))
    return PreparedPool(
        pool=pool, holdout=holdout, X_pool=X_pool, X_holdout=X_holdout,
        scaler=scaler,
    )


# -- oracles ------------------------------------------------------------------


class SimulatedOracle:
    """Replays stored ground-truth labels, standing in for the human expert."""

    def __init__(self, labels):
        self._labels = tuple(int(y) for y in labels)

    def label(self, indices) -> dict[int, int]:
        out = {}
        for i in indices:
            if not 0 <= i < len(self._labels):
                raise UnknownIndexError([i])
            out[int(i)] = self._labels[i]
        return out


class ExternalOracle:
    """Blocks the session thread until labels arrive from outside.

    `label` is called by the session runner; another thread (for example a
    request handler) delivers the answer through `submit`.
    """

    def __init__(self, timeout: float | None = None):
        self.timeout = timeout
        self._cond = threading.Condition()
        self._pending: tuple[int, ...] | None = None
        self._delivery: dict[int, int] | None = None

    @property
    def pending(self) -> tuple[int, ...] | None:
        with self._cond:
            return self._pending

    def submit(self, labels: dict[int, int]) -> None:
        with self._cond:
            if self._pending is None:
                raise LabelSubmissionError(extra=labels.keys())
            missing = set(self._pending) - set(labels)
            extra = set(labels) - set(self._pending)
            invalid = [i for i, y in labels.items() if y not in (0, 1)]
            if missing or extra or invalid:
                raise LabelSubmissionError(missing, extra, invalid)
            self._delivery = {int(i): int(y) for i, y in labels.items()}
            self._cond.notify_all()

    def label(self, indices) -> dict[int, int]:
        with self._cond:
            self._pending = tuple(int(i) for i in indices)
            self._delivery = None
            ok = self._cond.wait_for(
                lambda: self._delivery is not None, timeout=self.timeout
            )
            if not ok:
                self._pending = None
                raise ExternalTimeoutError(
                    f"no labels arrived within {self.timeout}s"
                )
            delivery = self._delivery
            self._pending = None
            self._delivery = None
            return delivery


def oracle_label(oracle, session: "ActiveLearningSession", indices) -> dict[int, int]:
    """Ask the oracle for labels after checking the indices are queryable."""
    pending = set(session.pending.indices) if session.pending else set()
    bad = [i for i in indices if i not in pending and not session.is_unlabeled(i)]
    if bad:
        raise UnknownIndexError(bad)
    return oracle.label(indices)


# -- selection ---------------------------------------------------------------


def rank_descending(values: np.ndarray, indices: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest values; equal values favor lower indices."""
    order = np.lexsort((indices, -values))
    return order[:k]


def select_uncertain(
    model,
    unlabeled: np.ndarray,
    p1: np.ndarray,
    k: int,
    fallback_scores: np.ndarray | None = None,
) -> QueryBatch:
    """Top-k unlabeled instances by prediction entropy.

    A degenerate (single-class) model carries no ranking information, so the
    batch falls back to outlier-score order when scores are attached
    (`fallback_scores` spans the whole pool, indexed by instance), and to
    ascending index otherwise.
    """
    if unlabeled.size == 0:
        raise EmptyUnlabeledSetError("no unlabeled instances left to query")
    if model is None:
        raise NotFittedError("model must be fitted before querying")
    k = min(k, unlabeled.size)
    if getattr(model, "degenerate", False):
        if fallback_scores is not None:
            values = np.asarray(fallback_scores, dtype=np.float64)[unlabeled]
        else:
            values = -np.asarray(unlabeled, dtype=np.float64)
        picks = rank_descending(values, unlabeled, k)
        return QueryBatch(
            indices=tuple(int(i) for i in unlabeled[picks]),
            scores=tuple(float(v) for v in values[picks]),
        )
    h = entropy(p1)
    picks = rank_descending(h, unlabeled, k)
    return QueryBatch(
        indices=tuple(int(i) for i in unlabeled[picks]),
        scores=tuple(float(v) for v in h[picks]),
    )


def select_random(
    unlabeled: np.ndarray, k: int, rng: np.random.Generator
) -> QueryBatch:
    """k uniform draws without replacement, reported in index order."""
    if unlabeled.size == 0:
        raise EmptyUnlabeledSetError("no unlabeled instances left to query")
    k = min(k, unlabeled.size)
    chosen = np.sort(rng.choice(unlabeled, size=k, replace=False))
    return QueryBatch(
        indices=tuple(int(i) for i in chosen),
        scores=(0.0,) * k,
    )


# -- session ------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    cycle: int
    labels_spent: int
    f1: float


@dataclass(frozen=True)
class SessionReport:
    """Summary + learning curve of one session (bulk predictions excluded)."""

    dataset_name: str
    backend: str
    config: dict
    pool_size: int
    holdout_size: int
    n_initial: int
    n_queried: int
    budget: int
    stop_reason: str
    anomalies_in_initial: int
    initial_indices: tuple[int, ...]
    curve: tuple[CurvePoint, ...]
    final_f1: float

    def to_json_bytes(self) -> bytes:
        doc = {
            "dataset_name": self.dataset_name,
            "backend": self.backend,
            "config": self.config,
            "pool_size": self.pool_size,
            "holdout_size": self.holdout_size,
            "n_initial": self.n_initial,
            "n_queried": self.n_queried,
            "budget": self.budget,
            "stop_reason": self.stop_reason,
            "anomalies_in_initial": self.anomalies_in_initial,
            "initial_indices": list(self.initial_indices),
            "curve": [
                {"cycle": p.cycle, "labels_spent": p.labels_spent, "f1": p.f1}
                for p in self.curve
            ],
            "final_f1": self.final_f1,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    def write_curve_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("cycle,labels_spent,f1\n")
            for p in self.curve:
                fh.write(f"{p.cycle},{p.labels_spent},{p.f1!r}\n")


class ActiveLearningSession:
    """Stepwise engine: expose a pending batch, accept labels, refit, repeat."""

    def __init__(
        self,
        dataset: Dataset,
        config: SessionConfig,
        eval_dataset: Dataset | None = None,
        prepared: PreparedPool | None = None,
        audit_hook=None,
    ):
        self.config = config
        self.dataset_name = dataset.name
        self._audit_hook = audit_hook
        if prepared is None:
            split = SplitSpec(seed=config.seed) if config.split == "auto" else None
            prepared = prepare_pool(dataset, split, eval_dataset)
        self.prepared = prepared
        n_pool = len(prepared.pool)
        if config.budget > n_pool:
            raise InvalidSizeError(
                f"budget {config.budget} exceeds pool size {n_pool}"
            )

        seeds = np.random.SeedSequence(config.seed).spawn(3)
        self._query_rng = np.random.default_rng(seeds[1])

        selection = build_initial_set(
            prepared.X_pool, config.init_method, config.n_initial,
            config.detectors, seed=seeds[0],
        )
        if selection.scores is not None:
            prepared.score_cache.setdefault(config.init_method, selection.scores)
        self._fallback = self._resolve_fallback_scores(seeds[2])

        self._di = selection.initial_indices
        self._dl: list[int] = []
        self._unlabeled_mask = np.zeros(n_pool, dtype=bool)
        self._unlabeled_mask[selection.unlabeled_indices] = True
        self._acquired: dict[int, int] = {}
        self.n_queried = 0
        self.cycle = 0
        self.curve: list[CurvePoint] = []
        self.model = None
        self.max_entropy: float | None = None
        self.stop_reason: str | None = None
        self._predictions: dict[int, tuple[int, str]] | None = None
        self.phase = PHASE_AWAITING
        self.pending: QueryBatch | None = QueryBatch(
            indices=tuple(int(i) for i in self._di),
            scores=tuple(
                float(selection.scores.scores[i]) for i in self._di
            ) if selection.scores is not None else (0.0,) * len(self._di),
            kind="initial",
        )

    def _resolve_fallback_scores(self, seed) -> np.ndarray | None:
        cfg = self.config
        if cfg.strategy != "uncertainty" or cfg.fallback_detector == "none":
            return None
        cached = self.prepared.score_cache.get(cfg.fallback_detector)
        if cached is None:
            cached = score_pool(
                self.prepared.X_pool, cfg.fallback_detector, cfg.detectors,
                seed=seed,
            )
            self.prepared.score_cache[cfg.fallback_detector] = cached
        return cached.scores

    # -- state accessors --------------------------------------------------

    @property
    def pool_labels(self) -> tuple[int, ...]:
        return self.prepared.pool.labels

    @property
    def labels_spent(self) -> int:
        spent = self.n_queried
        if self._acquired:  # the initial set is charged once labeled
            spent += len(self._di)
        return spent

    def unlabeled_indices(self) -> np.ndarray:
        return np.nonzero(self._unlabeled_mask)[0]

    def is_unlabeled(self, index: int) -> bool:
        return 0 <= index < self._unlabeled_mask.size and bool(
            self._unlabeled_mask[index]
        )

    def labeled_class_counts(self) -> tuple[int, int]:
        pos = sum(self._acquired.values())
        return (len(self._acquired) - pos, pos)

    def pool_state(self) -> PoolState:
        return PoolState(
            initial=tuple(int(i) for i in self._di),
            labeled=tuple(self._dl),
            unlabeled=tuple(int(i) for i in self.unlabeled_indices()),
            acquired=dict(self._acquired),
        )

    def ledger(self) -> BudgetLedger:
        return BudgetLedger(
            n_initial=len(self._di) if self._acquired else 0,
            n_queried=self.n_queried,
            budget=self.config.budget,
            confidence_tau=self.config.confidence_tau,
        )

    # -- transitions --------------------------------------------------------

    def submit_labels(self, labels: dict[int, int]) -> "ActiveLearningSession":
        if self.phase != PHASE_AWAITING or self.pending is None:
            raise WrongPhaseError(self.phase, PHASE_AWAITING)
        want = set(self.pending.indices)
        got = {int(i): y for i, y in labels.items()}
        missing = want - set(got)
        extra = set(got) - want
        invalid = [i for i, y in got.items() if y not in (0, 1)]
        if missing or extra or invalid:
            raise LabelSubmissionError(missing, extra, invalid)

        snapshot = (
            self._unlabeled_mask.copy(), list(self._dl), dict(self._acquired),
            self.n_queried, self.cycle, list(self.curve), self.pending,
            self.model, self.max_entropy,
        )
        self.phase = PHASE_TRAINING
        batch = self.pending
        try:
            if batch.kind == "query":
                for i in batch.indices:
                    self._unlabeled_mask[i] = False
                    self._dl.append(i)
                self.n_queried += len(batch.indices)
            self._acquired.update({i: int(y) for i, y in got.items()})
            self.pending = None
            self._refit_and_advance()
        except Exception:
            # a failed transition must leave the pre-submit state intact
            (self._unlabeled_mask, self._dl, self._acquired, self.n_queried,
             self.cycle, self.curve, self.pending, self.model,
             self.max_entropy) = snapshot
            self.phase = PHASE_AWAITING
            raise
        return self

    def _refit_and_advance(self) -> None:
        cfg = self.config
        rows = np.concatenate([self._di, np.asarray(self._dl, dtype=np.int64)]) \
            if self._dl else self._di
        y = np.array([self._acquired[int(i)] for i in rows], dtype=np.int64)
        self.model = fit(cfg.classifier, self.prepared.X_pool[rows], y)

        holdout_pred = self.model.predict(self.prepared.X_holdout)
        f1 = f1_from_predictions(holdout_pred, self.prepared.holdout.labels)
        self.curve.append(CurvePoint(self.cycle, self.labels_spent, f1))
        self._audit()

        unlabeled = self.unlabeled_indices()
        p1 = None
        if unlabeled.size:
            p1 = self.model.predict_proba(self.prepared.X_pool[unlabeled])[:, 1]
            self.max_entropy = float(np.max(entropy(p1)))
        else:
            self.max_entropy = None

        if self.labels_spent >= cfg.budget:
            return self._finish("budget_exhausted", unlabeled, p1)
        if unlabeled.size == 0:
            return self._finish("pool_exhausted", unlabeled, p1)
        if not self.model.degenerate and self.max_entropy < cfg.confidence_tau:
            return self._finish("confident", unlabeled, p1)

        k = min(cfg.k_per_cycle, cfg.budget - self.labels_spent, unlabeled.size)
        if cfg.strategy == "uncertainty":
            batch = select_uncertain(self.model, unlabeled, p1, k, self._fallback)
        else:
            batch = select_random(unlabeled, k, self._query_rng)
        self.cycle += 1
        self.pending = batch
        self.phase = PHASE_AWAITING

    def _finish(self, reason: str, unlabeled: np.ndarray, p1) -> None:
        predictions: dict[int, tuple[int, str]] = {
            int(i): (int(y), "oracle") for i, y in self._acquired.items()
        }
        if unlabeled.size and p1 is None and self.model is not None:
            p1 = self.model.predict_proba(self.prepared.X_pool[unlabeled])[:, 1]
        if unlabeled.size and p1 is not None:
            hard = (p1 >= 0.5).astype(np.int64)
            for i, y in zip(unlabeled, hard):
                predictions[int(i)] = (int(y), "model")
        self._predictions = predictions
        self.stop_reason = reason
        self.pending = None
        self.phase = PHASE_DONE

    def abort(self, reason: str = "aborted") -> None:
        """Finish early, emitting predictions from the latest model."""
        if self.phase == PHASE_DONE:
            return
        self._finish(reason, self.unlabeled_indices(), None)

    def _audit(self) -> None:
        n = self._unlabeled_mask.size
        di = set(int(i) for i in self._di)
        dl = set(self._dl)
        du = set(int(i) for i in self.unlabeled_indices())
        if len(self._dl) != len(dl):
            raise AuditError("labeled set contains duplicates")
        if (di & dl) or (di & du) or (dl & du):
            raise AuditError("initial/labeled/unlabeled sets overlap")
        if len(di) + len(dl) + len(du) != n:
            raise AuditError("pool partition lost instances")
        if set(self._acquired) != di | dl:
            raise AuditError("acquired labels do not cover the labeled sets")
        if self.labels_spent != len(di) + len(dl):
            raise AuditError("budget ledger out of sync with labeled sets")
        if self.labels_spent > self.config.budget:
            raise AuditError("label spend exceeded the budget")
        if self._audit_hook is not None:
            self._audit_hook(self)

    # -- outputs ------------------------------------------------------------

    def final_predictions(self) -> list[tuple[int, int, str]]:
        if self._predictions is None:
            raise NotFittedError("session has not finished")
        return [
            (i, label, source)
            for i, (label, source) in sorted(self._predictions.items())
        ]

    def report(self) -> SessionReport:
        if self.phase != PHASE_DONE or self.stop_reason is None:
            raise NotFittedError("session has not finished")
        return SessionReport(
            dataset_name=self.dataset_name,
            backend=BACKEND,
            config=self.config.to_dict(),
            pool_size=len(self.prepared.pool),
            holdout_size=len(self.prepared.holdout),
            n_initial=len(self._di),
            n_queried=self.n_queried,
            budget=self.config.budget,
            stop_reason=self.stop_reason,
            anomalies_in_initial=int(
                sum(self._acquired[int(i)] for i in self._di)
            ),
            initial_indices=tuple(int(i) for i in self._di),
            curve=tuple(self.curve),
            final_f1=self.curve[-1].f1 if self.curve else 0.0,
        )


def run_al_session(
    dataset: Dataset,
    config: SessionConfig,
    eval_dataset: Dataset | None = None,
    oracle=None,
    prepared: PreparedPool | None = None,
    audit_hook=None,
    stop_when=None,
) -> SessionReport:
    """Run a whole session against an oracle and return its report.

    With the default simulated oracle, labels come from the pool's stored
    ground truth. `stop_when(session)` may abort early (used by experiment
    sweeps once a target F1 is reached).
    """
    session = ActiveLearningSession(
        dataset, config, eval_dataset=eval_dataset, prepared=prepared,
        audit_hook=audit_hook,
    )
    if oracle is None:
        if config.oracle != "simulated":
            raise InvalidSizeError(
                "external-oracle sessions need an ExternalOracle instance"
            )
        oracle = SimulatedOracle(session.pool_labels)
    while session.phase != PHASE_DONE:
        batch = session.pending
        labels = oracle_label(oracle, session, batch.indices)
        session.submit_labels(labels)
        if stop_when is not None and session.phase != PHASE_DONE and stop_when(session):
            session.abort("target_reached")
    return session.report()
