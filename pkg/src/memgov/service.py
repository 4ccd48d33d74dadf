"""HTTP API under ``/v1``.

Bodies are JSON. Error mapping: validation -> 400, rejected writes -> 403,
unknown or deleted ids -> 404, anything else -> 500.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import MemGovError, NotFound, ValidationError, WriteRejected
from .model import MemoryKind, MemoryRecord, Source
from .retrieval import QueryIntent

logger = logging.getLogger(__name__)

API_VERSION = "v1"


class MemoryIn(BaseModel):
    content: str
    source: Source = Source.USER
    kind: MemoryKind = MemoryKind.EPISODIC
    derived_from: list[int] = Field(default_factory=list)
    at: float | None = None


class QueryIn(BaseModel):
    query: str
    intent: QueryIntent | None = None
    at: float | None = None


class FeedbackIn(BaseModel):
    answer: str
    retrieved: list[int] | None = None
    at: float | None = None


class MaintenanceIn(BaseModel):
    at: float | None = None


def record_to_dict(record: MemoryRecord) -> dict:
    return {
        "id": record.id,
        "content": record.content,
        "kind": record.kind.value,
        "source": record.source.source.value,
        "origin": record.source.origin,
        "created_at": record.created_at,
        "fsrs": {"stability": record.fsrs.stability, "difficulty": record.fsrs.difficulty,
                 "last_review": record.fsrs.last_review},
        "utility": {"trust": record.utility.trust, "covariance": record.utility.covariance},
        "derived_from": record.derived_from,
        "superseded_by": record.superseded_by,
    }


def create_app(
    engine: Engine,
    store_path: str | Path | None = None,
    clock: Callable[[], float] = time.time,
) -> FastAPI:
    """Build the app. ``clock`` supplies ``now`` (seconds) when a body omits ``at``.

    With ``store_path`` set, every mutation is persisted as a snapshot.
    """
    app = FastAPI(title="memgov", version=API_VERSION)
    # serializes mutations end to end; reads go straight to the store
    write_slot = threading.Lock()

    def now_of(at: float | None) -> float:
        return clock() if at is None else at

    def persist() -> None:
        if store_path is not None:
            engine.save(store_path)

    @app.exception_handler(MemGovError)
    async def _governance_error(request: Request, exc: MemGovError) -> JSONResponse:
        if isinstance(exc, WriteRejected):
            status, body = 403, {"error": "rejected", "reason": exc.reason}
        elif isinstance(exc, NotFound):
            status, body = 404, {"error": type(exc).__name__, "detail": str(exc)}
        elif isinstance(exc, ValidationError):
            status, body = 400, {"error": type(exc).__name__, "detail": str(exc)}
        else:
            logger.exception("internal error")
            status, body = 500, {"error": type(exc).__name__, "detail": str(exc)}
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": "ValidationError", "detail": exc.errors()})

    @app.get(f"/{API_VERSION}/health")
    def health() -> dict:
        return engine.health()

    @app.get(f"/{API_VERSION}/config")
    def config() -> dict:
        return {"fingerprint": engine.config.fingerprint(), "values": engine.config.to_dict()}

    @app.post(f"/{API_VERSION}/memories", status_code=201)
    def create_memory(body: MemoryIn) -> dict:
        with write_slot:
            memory_id = engine.ingest(body.content, now_of(body.at), body.source, body.kind, body.derived_from)
            persist()
        return record_to_dict(engine.get(memory_id))

    @app.get(f"/{API_VERSION}/memories/{{memory_id}}")
    def read_memory(memory_id: int) -> dict:
        return record_to_dict(engine.get(memory_id))

    @app.delete(f"/{API_VERSION}/memories/{{memory_id}}")
    def delete_memory(memory_id: int, cascade: bool = True) -> dict:
        with write_slot:
            if cascade:
                purged = engine.forget(memory_id)
            else:
                engine.get(memory_id)
                with engine.store.writer:
                    engine.store.tombstone(memory_id)
                    engine.store.graph.remove([memory_id])
                purged = [memory_id]
            persist()
        return {"purged": purged}

    @app.post(f"/{API_VERSION}/query")
    def query(body: QueryIn) -> dict:
        with write_slot:
            bundle = engine.query(body.query, now_of(body.at), body.intent)
            persist()
        return bundle.to_dict()

    @app.post(f"/{API_VERSION}/feedback")
    def feedback(body: FeedbackIn) -> dict:
        with write_slot:
            report = engine.feedback(body.answer, now_of(body.at), body.retrieved)
            persist()
        return report.to_dict()

    @app.post(f"/{API_VERSION}/maintenance")
    def maintenance(body: MaintenanceIn | None = None) -> dict:
        with write_slot:
            report = engine.maintain(now_of(body.at if body else None))
            persist()
        return report.to_dict()

    return app


def serve(engine: Engine, store_path: str | Path | None, host: str = "127.0.0.1", port: int = 8321) -> None:
    import uvicorn

    uvicorn.run(create_app(engine, store_path), host=host, port=port)
