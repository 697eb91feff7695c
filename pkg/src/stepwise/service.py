"""HTTP facade for the student playground.

Sessions hold the student's working code and an append-only event log
(JSON lines, one file per session) that survives restarts. A hint request
runs the full pipeline but returns only the textual part; the code diff is
withheld until the dedicated endpoint is called, matching the two-stage
reveal. The model solution is never served.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import model, pipeline
from .gateway import FixtureMiss, Gateway, ProviderConfig, ProviderError
from .model import HintBundle, StudentSnapshot, TaskSpec

logger = logging.getLogger("stepwise.service")


class CreateSessionBody(BaseModel):
    taskId: str
    code: Optional[str] = None


class UpdateCodeBody(BaseModel):
    code: str


class HintBody(BaseModel):
    testErrors: Optional[str] = None


@dataclass
class HintRecord:
    bundle: HintBundle
    accepted: bool = False


@dataclass
class Session:
    session_id: str
    task_id: str
    current_code: str
    attempt: int = 0
    hints: dict[str, HintRecord] = field(default_factory=dict)
    event_log: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """In-memory sessions backed by append-only JSONL files."""

    def __init__(self, data_dir: Optional[Path]):
        self.data_dir = Path(data_dir) / "sessions" if data_dir else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}

    # event sourcing

    def append(self, session: Session, event: str, **payload) -> None:
        record = {"event": event, "at": HintBundle.timestamp(), **payload}
        session.event_log.append(record)
        self._replay_one(session, record)
        if self.data_dir is not None:
            path = self.data_dir / f"{session.session_id}.jsonl"
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")

    @staticmethod
    def _replay_one(session: Session, record: dict) -> None:
        event = record["event"]
        if event == "SessionCreated":
            session.current_code = record["code"]
            session.attempt = 0
        elif event == "CodeUpdated":
            session.current_code = record["code"]
            session.attempt = 0
        elif event in ("HintRequested", "HintRegenerated"):
            if "bundle" in record:
                bundle = model.bundle_from_dict(record["bundle"])
                session.hints[bundle.hint_id] = HintRecord(bundle=bundle)
            if event == "HintRegenerated":
                session.attempt = record.get("attempt", session.attempt + 1)
        elif event == "HintAccepted":
            hint = session.hints.get(record["hintId"])
            if hint is not None:
                hint.accepted = True
                session.current_code = hint.bundle.code_hint.after
                session.attempt = 0
        # CodeHintViewed and HintCancelled only mark the log

    def create(self, task_id: str, code: str) -> Session:
        session = Session(session_id=uuid.uuid4().hex, task_id=task_id,
                          current_code=code)
        self.sessions[session.session_id] = session
        self.append(session, "SessionCreated", taskId=task_id, code=code)
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def load_all(self) -> None:
        if self.data_dir is None:
            return
        for path in sorted(self.data_dir.glob("*.jsonl")):
            session_id = path.stem
            records, recoverable = self._read_log(path)
            if not recoverable:
                logger.warning("session %s unrecoverable; skipping", session_id)
                continue
            if not records:
                continue
            first = records[0]
            session = Session(session_id=session_id,
                              task_id=first.get("taskId", ""),
                              current_code="")
            for record in records:
                session.event_log.append(record)
                self._replay_one(session, record)
            self.sessions[session_id] = session

    @staticmethod
    def _read_log(path: Path) -> tuple[list[dict], bool]:
        records: list[dict] = []
        lines = path.read_text("utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    logger.warning("truncated final event in %s dropped", path.name)
                    return records, True
                return [], False
        return records, True


def create_app(task_pack_dir: str | Path, provider: ProviderConfig,
               data_dir: Optional[str | Path] = None,
               playground_origin: str = "*") -> FastAPI:
    pack = model.load_task_pack(task_pack_dir)
    report = model.validate_task_pack(pack)
    if not report.ok:
        details = "; ".join(i.message for i in report.issues)
        raise model.TaskPackError(f"invalid task pack: {details}")
    tasks = model.task_index(pack)

    app = FastAPI(title="stepwise hint service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[playground_origin] if playground_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(Path(data_dir) if data_dir else None)
    store.load_all()
    gateway = Gateway(provider)
    app.state.store = store
    app.state.tasks = tasks

    def find_task(task_id: str) -> TaskSpec:
        task = tasks.get(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail="unknown task")
        return task

    # ── tasks ──────────────────────────────────────────────────────────

    @app.get("/tasks")
    def list_tasks():
        return [{"id": t.id, "project": t.project_id, "title": t.title}
                for t in pack]

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        task = find_task(task_id)
        return {
            "id": task.id,
            "project": task.project_id,
            "title": task.title,
            "description": task.description,
            "predefinedHints": list(task.predefined_hints),
        }

    # ── sessions ───────────────────────────────────────────────────────

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        find_task(body.taskId)
        code = body.code or ""
        session = store.create(body.taskId, code)
        return {"sessionId": session.session_id, "starterCode": code}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {
                "sessionId": session.session_id,
                "taskId": session.task_id,
                "code": session.current_code,
                "attempt": session.attempt,
            }

    @app.put("/sessions/{session_id}/code", status_code=204)
    def update_code(session_id: str, body: UpdateCodeBody):
        session = store.get(session_id)
        with session.lock:
            store.append(session, "CodeUpdated", code=body.code)
        return Response(status_code=204)

    # ── hints ──────────────────────────────────────────────────────────

    def _run_pipeline(session: Session, test_errors: Optional[str],
                      regenerate: bool):
        task = find_task(session.task_id)
        attempt = session.attempt + 1 if regenerate else session.attempt
        snapshot = StudentSnapshot(task_id=session.task_id,
                                   code=session.current_code,
                                   test_errors=test_errors,
                                   attempt=attempt)
        try:
            outcome = pipeline.generate_hint(task, snapshot, gateway.config,
                                             session_id=session.session_id,
                                             gateway=gateway)
        except (FixtureMiss, ProviderError) as exc:
            store.append(session, "HintRequested", outcome="ProviderError",
                         detail=str(exc))
            raise HTTPException(status_code=502, detail=str(exc))
        event = "HintRegenerated" if regenerate else "HintRequested"
        if outcome.bundle is None:
            store.append(session, event, outcome="NoHint",
                         reason=outcome.no_hint_reason)
            raise HTTPException(status_code=422,
                                detail={"reason": outcome.no_hint_reason})
        payload = {"bundle": model.bundle_to_dict(outcome.bundle)}
        if regenerate:
            payload["attempt"] = attempt
        store.append(session, event, outcome="hint", **payload)
        bundle = outcome.bundle
        return {
            "hintId": bundle.hint_id,
            "text": bundle.text_hint.text,
            "highlight": {
                "startLine": bundle.text_hint.highlight[0],
                "endLine": bundle.text_hint.highlight[1],
            },
        }

    @app.post("/sessions/{session_id}/hint")
    def request_hint(session_id: str, body: HintBody = None):
        session = store.get(session_id)
        with session.lock:
            errors = body.testErrors if body else None
            return _run_pipeline(session, errors, regenerate=False)

    @app.post("/sessions/{session_id}/hint/regenerate")
    def regenerate_hint(session_id: str, body: HintBody = None):
        session = store.get(session_id)
        with session.lock:
            if not session.hints:
                raise HTTPException(status_code=409,
                                    detail="no hint to regenerate")
            errors = body.testErrors if body else None
            return _run_pipeline(session, errors, regenerate=True)

    def find_hint(session: Session, hint_id: str) -> HintRecord:
        record = session.hints.get(hint_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown hint")
        return record

    @app.get("/sessions/{session_id}/hints/{hint_id}/code")
    def get_code_hint(session_id: str, hint_id: str):
        session = store.get(session_id)
        with session.lock:
            record = find_hint(session, hint_id)
            store.append(session, "CodeHintViewed", hintId=hint_id)
            hint = record.bundle.code_hint
            changes = {
                "function": f"{hint.target_function[0]}/{hint.target_function[1]}",
                "units": [hint.retained_unit.to_json()],
            }
            return {
                "before": hint.before,
                "after": hint.after,
                "diff": [changes],
                "provenance": hint.provenance.value,
            }

    @app.post("/sessions/{session_id}/hints/{hint_id}/accept")
    def accept_hint(session_id: str, hint_id: str):
        session = store.get(session_id)
        with session.lock:
            record = find_hint(session, hint_id)
            after = record.bundle.code_hint.after
            if record.accepted:
                store.append(session, "HintAccepted", hintId=hint_id)
                return {"code": after}
            if session.current_code != record.bundle.code_hint.before:
                raise HTTPException(status_code=409,
                                    detail="code changed since this hint was created")
            store.append(session, "HintAccepted", hintId=hint_id)
            return {"code": after}

    @app.post("/sessions/{session_id}/hints/{hint_id}/cancel", status_code=204)
    def cancel_hint(session_id: str, hint_id: str):
        session = store.get(session_id)
        with session.lock:
            find_hint(session, hint_id)
            store.append(session, "HintCancelled", hintId=hint_id)
        return Response(status_code=204)

    return app
