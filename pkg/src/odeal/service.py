"""HTTP/JSON annotation service: humans label queried observations and the
active-learning engine retrains between submissions.

Sessions persist as append-only event logs (creation + every label
submission); replaying a log deterministically rebuilds the engine state, so
a restart resumes at the last completed phase. Error bodies are always
``{"code", "message", "details"}``.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .data import (
    FEATURE_NAMES,
    FEATURE_UNITS,
    Dataset,
    parse_observations_csv,
)
from .engine import (
    PHASE_AWAITING,
    PHASE_DONE,
    PHASE_TRAINING,
    ActiveLearningSession,
    SessionConfig,
    entropy,
)
from .errors import (
    LabelSubmissionError,
    OdealError,
    WrongPhaseError,
)

CONTEXT_WINDOW = 4  # records on each side of the queried timestamp

INITIAL_LABELING_MODES = ("external", "trusted")


def _error_body(code: str, message: str, details=None) -> dict:
    return {"code": code, "message": message, "details": details or {}}


def _json_error(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(_error_body(code, message, details), status_code=status)


class SessionRuntime:
    """One live session: engine state, event log, revision, cached view."""

    def __init__(
        self,
        session_id: str,
        dataset_id: str,
        dataset: Dataset,
        config: SessionConfig,
        initial_labeling: str,
        log_path: Path,
    ):
        self.session_id = session_id
        self.dataset_id = dataset_id
        self.config = config
        self.initial_labeling = initial_labeling
        self.log_path = log_path
        self.lock = threading.Lock()
        self.revision = 0
        self.engine = ActiveLearningSession(dataset, config)
        self._time_order = sorted(
            range(len(self.engine.prepared.pool)),
            key=lambda i: (self.engine.prepared.pool.records[i].timestamp, i),
        )
        self._time_rank = {idx: pos for pos, idx in enumerate(self._time_order)}
        self.view: dict = {}
        self._rebuild_view()

    # -- event log ----------------------------------------------------------

    def append_event(self, event: dict) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    # -- transitions ----------------------------------------------------------

    def apply_labels(self, labels: dict[int, int], log: bool = True) -> None:
        """Engine transition + event append; caller holds the lock."""
        self.view = {**self.view, "phase": PHASE_TRAINING}
        try:
            self.engine.submit_labels(labels)
        except Exception:
            self._rebuild_view()
            raise
        if log:
            self.append_event(
                {"event": "labels", "labels": {str(i): y for i, y in labels.items()}}
            )
        self.revision += 1
        self._rebuild_view()

    # -- payload builders -----------------------------------------------------

    def _context_for(self, index: int) -> list[dict]:
        pool = self.engine.prepared.pool
        rank = self._time_rank[index]
        lo = max(0, rank - CONTEXT_WINDOW)
        hi = min(len(self._time_order), rank + CONTEXT_WINDOW + 1)
        rows = []
        for pos in range(lo, hi):
            i = self._time_order[pos]
            record = pool.records[i]
            rows.append({
                "index": i,
                "timestamp": record.timestamp,
                "pressure": record.pressure,
                "temperature": record.temperature,
                "salinity": record.salinity,
                "is_queried": i == index,
            })
        return rows

    def _pending_payload(self) -> dict | None:
        batch = self.engine.pending
        if batch is None:
            return None
        pool = self.engine.prepared.pool
        model = self.engine.model
        p1_by_index = {}
        if model is not None:
            rows = self.engine.prepared.X_pool[list(batch.indices)]
            p1 = model.predict_proba(rows)[:, 1]
            p1_by_index = {i: float(v) for i, v in zip(batch.indices, p1)}
        instances = []
        for i, score in zip(batch.indices, batch.scores):
            record = pool.records[i]
            features = dict(zip(FEATURE_NAMES, record.features))
            p1 = p1_by_index.get(i)
            instances.append({
                "index": i,
                "features": features,
                "units": dict(FEATURE_UNITS),
                "selection_score": score,
                "model_p1": p1,
                "model_entropy": entropy(p1) if p1 is not None else None,
                "context": self._context_for(i),
            })
        return {
            "kind": batch.kind,
            "size": len(batch),
            "remaining_budget": self.config.budget - self.engine.labels_spent,
            "instances": instances,
        }

    def _rebuild_view(self) -> None:
        engine = self.engine
        ledger = engine.ledger()
        good, bad = engine.labeled_class_counts()
        status = {
            "session_id": self.session_id,
            "dataset_id": self.dataset_id,
            "phase": engine.phase,
            "revision": self.revision,
            "initial_labeling": self.initial_labeling,
            "n_initial": ledger.n_initial,
            "n_queried": ledger.n_queried,
            "budget": ledger.budget,
            "labels_spent": ledger.spent,
            "confidence_tau": ledger.confidence_tau,
            "max_entropy": engine.max_entropy,
            "class_balance": {"good": good, "bad": bad},
            "curve": [
                {"cycle": p.cycle, "labels_spent": p.labels_spent, "f1": p.f1}
                for p in engine.curve
            ],
            "f1_available": True,
            "stop_reason": engine.stop_reason,
        }
        if engine.phase == PHASE_DONE:
            status["predictions_url"] = f"/sessions/{self.session_id}/predictions"
            status["report_url"] = f"/sessions/{self.session_id}/report"
        self.view = {
            "phase": engine.phase,
            "revision": self.revision,
            "status": status,
            "pending": self._pending_payload(),
        }


class ServiceStore:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.datasets_dir = self.data_dir / "datasets"
        self.sessions_dir = self.data_dir / "sessions"
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.datasets: dict[str, Dataset] = {}
        self.sessions: dict[str, SessionRuntime] = {}
        self._load()

    def _load(self) -> None:
        for csv_path in sorted(self.datasets_dir.glob("*.csv")):
            dataset_id = csv_path.stem
            self.datasets[dataset_id] = parse_observations_csv(
                csv_path, name=dataset_id
            )
        for log_path in sorted(self.sessions_dir.glob("*.jsonl")):
            self._replay(log_path)

    def _replay(self, log_path: Path) -> None:
        with open(log_path, "r", encoding="utf-8") as fh:
            events = [json.loads(line) for line in fh if line.strip()]
        if not events or events[0].get("event") != "created":
            return
        created = events[0]
        dataset = self.datasets.get(created["dataset_id"])
        if dataset is None:
            return
        runtime = SessionRuntime(
            session_id=created["session_id"],
            dataset_id=created["dataset_id"],
            dataset=dataset,
            config=SessionConfig.from_dict(created["config"]),
            initial_labeling=created["initial_labeling"],
            log_path=log_path,
        )
        for event in events[1:]:
            if event.get("event") != "labels":
                continue
            labels = {int(i): int(y) for i, y in event["labels"].items()}
            runtime.apply_labels(labels, log=False)
        self.sessions[runtime.session_id] = runtime

    def add_dataset(self, csv_text: str) -> tuple[str, Dataset]:
        dataset_id = hashlib.sha256(csv_text.encode()).hexdigest()[:12]
        path = self.datasets_dir / f"{dataset_id}.csv"
        if dataset_id not in self.datasets:
            path.write_text(csv_text, encoding="utf-8")
            try:
                self.datasets[dataset_id] = parse_observations_csv(
                    path, name=dataset_id
                )
            except OdealError:
                path.unlink(missing_ok=True)
                raise
        return dataset_id, self.datasets[dataset_id]

    def create_session(
        self, dataset_id: str, config: SessionConfig, initial_labeling: str
    ) -> SessionRuntime:
        dataset = self.datasets[dataset_id]
        session_id = uuid.uuid4().hex[:16]
        runtime = SessionRuntime(
            session_id=session_id,
            dataset_id=dataset_id,
            dataset=dataset,
            config=config,
            initial_labeling=initial_labeling,
            log_path=self.sessions_dir / f"{session_id}.jsonl",
        )
        runtime.append_event({
            "event": "created",
            "session_id": session_id,
            "dataset_id": dataset_id,
            "config": config.to_dict(),
            "initial_labeling": initial_labeling,
        })
        if initial_labeling == "trusted":
            truth = runtime.engine.pool_labels
            batch = runtime.engine.pending
            runtime.apply_labels({i: truth[i] for i in batch.indices})
        self.sessions[session_id] = runtime
        return runtime


def create_app(data_dir: Path | str) -> FastAPI:
    app = FastAPI(title="odeal annotation service", docs_url=None, redoc_url=None)
    store = ServiceStore(Path(data_dir))
    app.state.store = store

    @app.exception_handler(OdealError)
    async def odeal_error_handler(request: Request, exc: OdealError):
        return _json_error(422, type(exc).__name__, str(exc))

    @app.post("/datasets")
    async def upload_dataset(request: Request):
        body = await request.body()
        if not body:
            return _json_error(422, "empty_upload", "request body must be CSV text")
        try:
            dataset_id, dataset = store.add_dataset(body.decode("utf-8"))
        except UnicodeDecodeError:
            return _json_error(422, "encoding", "CSV must be UTF-8")
        except OdealError as exc:
            return _json_error(422, type(exc).__name__, str(exc))
        return JSONResponse(
            {
                "dataset_id": dataset_id,
                "rows": len(dataset),
                "error_rate": dataset.error_rate,
            },
            status_code=201,
        )

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _json_error(422, "bad_json", "request body must be JSON")
        dataset_id = payload.get("dataset_id")
        if dataset_id not in store.datasets:
            return _json_error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        initial_labeling = payload.get("initial_labeling", "external")
        if initial_labeling not in INITIAL_LABELING_MODES:
            return _json_error(
                422, "invalid_config",
                f"initial_labeling must be one of {INITIAL_LABELING_MODES}",
            )
        try:
            config = SessionConfig.from_dict(payload.get("config", {}))
            if config.n_initial >= config.budget:
                # a live session with zero query cycles is never intended
                return _json_error(
                    422, "invalid_config",
                    "budget must exceed the initial set size",
                )
            runtime = store.create_session(dataset_id, config, initial_labeling)
        except (OdealError, KeyError, TypeError, ValueError) as exc:
            return _json_error(422, "invalid_config", str(exc))
        view = runtime.view
        return JSONResponse(
            {
                "session_id": runtime.session_id,
                "phase": view["phase"],
                "revision": view["revision"],
                "pending": view["pending"],
            },
            status_code=201,
        )

    def _runtime_or_404(session_id: str):
        runtime = store.sessions.get(session_id)
        if runtime is None:
            return None, _json_error(404, "unknown_session", f"no session {session_id!r}")
        return runtime, None

    @app.get("/sessions/{session_id}/pending")
    async def fetch_pending(session_id: str):
        runtime, err = _runtime_or_404(session_id)
        if err:
            return err
        view = runtime.view
        if view["phase"] == PHASE_TRAINING:
            return _json_error(409, "training", "session is retraining", {
                "status_url": f"/sessions/{session_id}/status",
            })
        if view["phase"] == PHASE_DONE:
            return _json_error(409, "done", "session is finished", {
                "status_url": f"/sessions/{session_id}/status",
                "predictions_url": f"/sessions/{session_id}/predictions",
            })
        return JSONResponse({
            "session_id": session_id,
            "phase": view["phase"],
            "revision": view["revision"],
            "pending": view["pending"],
        })

    @app.post("/sessions/{session_id}/labels")
    async def submit_labels(session_id: str, request: Request):
        runtime, err = _runtime_or_404(session_id)
        if err:
            return err
        try:
            payload = await request.json()
        except Exception:
            return _json_error(422, "bad_json", "request body must be JSON")
        raw = payload.get("labels")
        if not isinstance(raw, dict):
            return _json_error(422, "label_submission",
                               "body needs a labels object {index: 0|1}")
        try:
            labels = {int(i): int(y) for i, y in raw.items()}
        except (TypeError, ValueError):
            return _json_error(422, "label_submission",
                               "labels must map integer indices to 0 or 1")
        with runtime.lock:
            claimed = payload.get("revision")
            if claimed is not None and claimed != runtime.revision:
                return _json_error(409, "stale_revision",
                                   "another submission advanced this session", {
                                       "current_revision": runtime.revision,
                                   })
            try:
                runtime.apply_labels(labels)
            except WrongPhaseError as exc:
                return _json_error(409, "wrong_phase", str(exc))
            except LabelSubmissionError as exc:
                return _json_error(422, "label_submission", str(exc), {
                    "missing": sorted(exc.missing),
                    "extra": sorted(exc.extra),
                    "invalid": sorted(exc.invalid),
                })
            view = runtime.view
        return JSONResponse({
            "session_id": session_id,
            "phase": view["phase"],
            "revision": view["revision"],
            "status": view["status"],
            "pending": view["pending"],
        })

    @app.get("/sessions/{session_id}/status")
    async def get_status(session_id: str):
        runtime, err = _runtime_or_404(session_id)
        if err:
            return err
        return JSONResponse(runtime.view["status"])

    @app.get("/sessions/{session_id}/predictions")
    async def get_predictions(session_id: str):
        runtime, err = _runtime_or_404(session_id)
        if err:
            return err
        if runtime.view["phase"] != PHASE_DONE:
            return _json_error(409, "not_done", "session has not finished", {
                "status_url": f"/sessions/{session_id}/status",
            })
        lines = ["index,predicted_label,source"]
        for index, label, source in runtime.engine.final_predictions():
            lines.append(f"{index},{label},{source}")
        return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")

    @app.get("/sessions/{session_id}/report")
    async def get_report(session_id: str):
        runtime, err = _runtime_or_404(session_id)
        if err:
            return err
        if runtime.view["phase"] != PHASE_DONE:
            return _json_error(409, "not_done", "session has not finished", {
                "status_url": f"/sessions/{session_id}/status",
            })
        return Response(
            content=runtime.engine.report().to_json_bytes(),
            media_type="application/json",
        )

    return app
