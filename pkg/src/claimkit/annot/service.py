"""HTTP facade over the annotation store.

JSON in, JSON out; every mutation is serialized through the store's
lock. Annotator-facing responses never carry method identity; the
unblinding mapping is available only through the admin endpoint.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..data import DataError
from .store import AnnotError, AnnotStore


class RegisterRequest(BaseModel):
    name: str


class JudgmentRequest(BaseModel):
    task_id: str
    annotator_id: str
    label: str


class IngestRequest(BaseModel):
    predictions_path: str
    dataset_path: str
    k: int = 3


def create_app(store: AnnotStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="annotation service")

    @app.post("/annotators")
    def register(req: RegisterRequest):
        try:
            return {"annotator_id": store.register(req.name)}
        except AnnotError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/tasks/next")
    def next_task(annotator_id: str):
        try:
            task = store.next_task(annotator_id)
        except AnnotError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"task": task.client_view() if task else None}

    @app.post("/judgments")
    def submit(req: JudgmentRequest):
        try:
            return store.submit_judgment(req.annotator_id, req.task_id, req.label)
        except AnnotError as exc:
            status = 409 if "conflicting" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc))

    @app.get("/stats")
    def stats():
        return store.stats()

    @app.post("/admin/ingest")
    def ingest(req: IngestRequest):
        try:
            return store.ingest(req.predictions_path, req.dataset_path, req.k)
        except (AnnotError, DataError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/admin/unblind")
    def unblind():
        return {"mapping": store.unblind()}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
