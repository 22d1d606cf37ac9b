"""Experiment harnesses: uncertainty-vs-random querying, and outlier-ranked
vs random initial sets compared by reduced annotation cost.

Both harnesses pair their arms: for each seed, every arm sees the identical
pool split (and, where applicable, the identical initial set), so differences
come from the treatment alone.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass

from .data import Dataset, SplitSpec
from .detectors import DetectorConfig
from .engine import (
    ActiveLearningSession,
    PreparedPool,
    SessionConfig,
    SessionReport,
    SimulatedOracle,
    oracle_label,
    prepare_pool,
)
from .errors import AuditError, TargetUnreachableError
from .metrics import CostComparison, cost_reduced
from .models import ClassifierSpec


def _canonical_json_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


# -- uncertainty sampling vs random sampling ----------------------------------


@dataclass(frozen=True)
class StrategyRun:
    seed: int
    report_us: SessionReport
    report_rs: SessionReport

    @property
    def f1_us(self) -> float:
        return self.report_us.final_f1

    @property
    def f1_rs(self) -> float:
        return self.report_rs.final_f1

    @property
    def absolute_improvement(self) -> float:
        return self.f1_us - self.f1_rs

    @property
    def relative_improvement(self) -> float | None:
        if self.f1_rs == 0.0:
            return None
        return (self.f1_us - self.f1_rs) / self.f1_rs


@dataclass(frozen=True)
class StrategyExperimentReport:
    dataset_name: str
    config: dict
    runs: tuple[StrategyRun, ...]

    @property
    def wins(self) -> int:
        return sum(1 for r in self.runs if r.f1_us > r.f1_rs)

    @property
    def median_absolute_improvement(self) -> float:
        return statistics.median(r.absolute_improvement for r in self.runs)

    @property
    def median_relative_improvement(self) -> float | None:
        defined = [
            r.relative_improvement for r in self.runs
            if r.relative_improvement is not None
        ]
        return statistics.median(defined) if defined else None

    def to_json_dict(self) -> dict:
        return {
            "experiment": "uncertainty_vs_random",
            "dataset_name": self.dataset_name,
            "config": self.config,
            "runs": [
                {
                    "seed": r.seed,
                    "f1_uncertainty": r.f1_us,
                    "f1_random": r.f1_rs,
                    "absolute_improvement": r.absolute_improvement,
                    "relative_improvement": r.relative_improvement,
                    "labels_spent": r.report_us.n_initial + r.report_us.n_queried,
                }
                for r in self.runs
            ],
            "aggregate": {
                "seeds": len(self.runs),
                "uncertainty_wins": self.wins,
                "median_absolute_improvement": self.median_absolute_improvement,
                "median_relative_improvement": self.median_relative_improvement,
            },
        }

    def to_json_bytes(self) -> bytes:
        return _canonical_json_bytes(self.to_json_dict())


def run_strategy_experiment(
    dataset: Dataset,
    classifier: ClassifierSpec,
    n_initial: int,
    budget: int,
    k_per_cycle: int = 1,
    seeds=(0,),
    init_method: str = "random",
    confidence_tau: float = 0.0,
    detectors: DetectorConfig | None = None,
    strategies: tuple[str, str] = ("uncertainty", "random"),
) -> StrategyExperimentReport:
    """Paired uncertainty-vs-random sessions, one pair per seed.

    Both arms share the seed, hence the identical pool split and initial set
    (asserted). `strategies` may name the same strategy twice for a
    self-comparison control.
    """
    detectors = detectors or DetectorConfig()
    runs = []
    for seed in seeds:
        prepared = prepare_pool(dataset, SplitSpec(seed=seed))
        reports = []
        for strategy in strategies:
            cfg = SessionConfig(
                classifier=classifier,
                n_initial=n_initial,
                budget=budget,
                init_method=init_method,
                k_per_cycle=k_per_cycle,
                confidence_tau=confidence_tau,
                strategy=strategy,
                seed=seed,
                detectors=detectors,
            )
            reports.append(_run_with_simulated_oracle(dataset, cfg, prepared))
        if reports[0].initial_indices != reports[1].initial_indices:
            raise AuditError("paired arms diverged on the initial set")
        runs.append(StrategyRun(seed=seed, report_us=reports[0], report_rs=reports[1]))
    common = {
        "classifier": classifier.to_dict(),
        "n_initial": n_initial,
        "budget": budget,
        "k_per_cycle": k_per_cycle,
        "init_method": init_method,
        "confidence_tau": confidence_tau,
        "strategies": list(strategies),
        "seeds": list(seeds),
    }
    return StrategyExperimentReport(
        dataset_name=dataset.name, config=common, runs=tuple(runs)
    )


def _run_with_simulated_oracle(
    dataset: Dataset,
    cfg: SessionConfig,
    prepared: PreparedPool,
    target_f1: float | None = None,
) -> SessionReport:
    session = ActiveLearningSession(dataset, cfg, prepared=prepared)
    oracle = SimulatedOracle(session.pool_labels)
    while session.phase != "done":
        labels = oracle_label(oracle, session, session.pending.indices)
        session.submit_labels(labels)
        if (
            target_f1 is not None
            and session.phase != "done"
            and session.curve
            and session.curve[-1].f1 >= target_f1
        ):
            session.abort("target_reached")
    return session.report()


# -- initial-set construction comparison --------------------------------------


@dataclass(frozen=True)
class ArmOutcome:
    method: str
    reached: bool
    n_initial: int = 0
    n_queried: int = 0
    f1: float = 0.0

    @property
    def labels_spent(self) -> int:
        return self.n_initial + self.n_queried


@dataclass(frozen=True)
class InitComparisonRun:
    seed: int
    outlier_arm: ArmOutcome
    random_arm: ArmOutcome

    @property
    def cost_reduced(self) -> float | None:
        if not (self.outlier_arm.reached and self.random_arm.reached):
            return None
        return cost_reduced(CostComparison(
            n_initial_outlier=self.outlier_arm.n_initial,
            n_queried_outlier=self.outlier_arm.n_queried,
            n_initial_random=self.random_arm.n_initial,
            n_queried_random=self.random_arm.n_queried,
            f1_outlier=self.outlier_arm.f1,
            f1_random=self.random_arm.f1,
        ))


@dataclass(frozen=True)
class InitExperimentReport:
    dataset_name: str
    config: dict
    runs: tuple[InitComparisonRun, ...]

    @property
    def median_cost_reduced(self) -> float | None:
        defined = [r.cost_reduced for r in self.runs if r.cost_reduced is not None]
        return statistics.median(defined) if defined else None

    def to_json_dict(self) -> dict:
        return {
            "experiment": "initial_set_comparison",
            "dataset_name": self.dataset_name,
            "config": self.config,
            "runs": [
                {
                    "seed": r.seed,
                    "outlier_arm": {
                        "method": r.outlier_arm.method,
                        "reached": r.outlier_arm.reached,
                        "n_initial": r.outlier_arm.n_initial,
                        "n_queried": r.outlier_arm.n_queried,
                        "f1": r.outlier_arm.f1,
                    },
                    "random_arm": {
                        "method": r.random_arm.method,
                        "reached": r.random_arm.reached,
                        "n_initial": r.random_arm.n_initial,
                        "n_queried": r.random_arm.n_queried,
                        "f1": r.random_arm.f1,
                    },
                    "cost_reduced": r.cost_reduced,
                }
                for r in self.runs
            ],
            "aggregate": {
                "seeds": len(self.runs),
                "median_cost_reduced": self.median_cost_reduced,
                "comparable_seeds": sum(
                    1 for r in self.runs if r.cost_reduced is not None
                ),
            },
        }

    def to_json_bytes(self) -> bytes:
        return _canonical_json_bytes(self.to_json_dict())


def _sweep_arm(
    dataset: Dataset,
    classifier: ClassifierSpec,
    method: str,
    ni_grid,
    query_budget: int,
    k_per_cycle: int,
    target_f1: float,
    seed: int,
    detectors: DetectorConfig,
    prepared: PreparedPool,
) -> ArmOutcome:
    """Ascending initial-size sweep; first grid point whose session reaches
    the target F1 wins, with queries halted at the first reaching refit."""
    for n_initial in ni_grid:
        cfg = SessionConfig(
            classifier=classifier,
            n_initial=n_initial,
            budget=min(n_initial + query_budget, len(prepared.pool)),
            init_method=method,
            k_per_cycle=k_per_cycle,
            confidence_tau=0.0,
            strategy="uncertainty",
            seed=seed,
            detectors=detectors,
        )
        report = _run_with_simulated_oracle(dataset, cfg, prepared, target_f1)
        hit = next((p for p in report.curve if p.f1 >= target_f1), None)
        if hit is not None:
            return ArmOutcome(
                method=method,
                reached=True,
                n_initial=report.n_initial,
                n_queried=hit.labels_spent - report.n_initial,
                f1=hit.f1,
            )
    return ArmOutcome(method=method, reached=False)


def run_init_experiment(
    dataset: Dataset,
    classifier: ClassifierSpec,
    ni_grid=(100, 200, 400),
    query_budget: int = 150,
    k_per_cycle: int = 1,
    target_f1: float = 0.4,
    seeds=(0,),
    detectors: DetectorConfig | None = None,
    outlier_method: str = "lof",
) -> InitExperimentReport:
    """Smallest (initial size, queries) reaching the target F1, per arm, then
    the reduced-cost comparison of the outlier arm against the random arm."""
    detectors = detectors or DetectorConfig()
    runs = []
    for seed in seeds:
        prepared = prepare_pool(dataset, SplitSpec(seed=seed))
        outlier_arm = _sweep_arm(
            dataset, classifier, outlier_method, ni_grid, query_budget,
            k_per_cycle, target_f1, seed, detectors, prepared,
        )
        random_arm = _sweep_arm(
            dataset, classifier, "random", ni_grid, query_budget,
            k_per_cycle, target_f1, seed, detectors, prepared,
        )
        runs.append(InitComparisonRun(
            seed=seed, outlier_arm=outlier_arm, random_arm=random_arm,
        ))
    for method, outcomes in (
        (outlier_method, [r.outlier_arm for r in runs]),
        ("random", [r.random_arm for r in runs]),
    ):
        if not any(o.reached for o in outcomes):
            raise TargetUnreachableError(method, target_f1)
    common = {
        "classifier": classifier.to_dict(),
        "ni_grid": list(ni_grid),
        "query_budget": query_budget,
        "k_per_cycle": k_per_cycle,
        "target_f1": target_f1,
        "seeds": list(seeds),
        "outlier_method": outlier_method,
    }
    return InitExperimentReport(
        dataset_name=dataset.name, config=common, runs=tuple(runs)
    )
