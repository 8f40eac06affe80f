"""HTTP API over the review store, plus static serving of images and the
review UI bundle."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    AlreadyDecided,
    InvalidFraction,
    NotLeasedToYou,
    NoWork,
    RubricVerdictMismatch,
    UnknownItem,
)
from .review import ReviewDecision, ReviewStore, Rubric

__all__ = ["create_app"]


class RubricBody(BaseModel):
    object_recognition: bool
    spatial_logic: bool
    mask_quality: bool
    grammar: bool


class DecisionBody(BaseModel):
    item_id: str
    reviewer_id: str
    rubric: RubricBody
    verdict: str
    notes: str = ""
    revise: bool = False


class AuditBody(BaseModel):
    fraction: float
    seed: int = 0


def create_app(store: ReviewStore, images_dir: str | None = None,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="review service")

    @app.get("/api/queue/next")
    def queue_next(reviewer: str):
        if not reviewer:
            raise HTTPException(status_code=422, detail="reviewer id required")
        try:
            item, expiry = store.next_item(reviewer)
        except NoWork:
            return Response(status_code=204)
        return {"item": item.to_json(), "lease_expiry": expiry}

    @app.get("/api/item/{item_id}")
    def get_item(item_id: str):
        try:
            return store.get_item(item_id).to_json()
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/api/decision")
    def post_decision(body: DecisionBody):
        decision = ReviewDecision(
            item_id=body.item_id,
            reviewer_id=body.reviewer_id,
            rubric=Rubric(**body.rubric.model_dump()),
            verdict=body.verdict,
            notes=body.notes,
            timestamp=store._clock(),
        )
        try:
            return store.submit_decision(decision, revise=body.revise)
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except NotLeasedToYou as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except AlreadyDecided as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except RubricVerdictMismatch as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/api/progress")
    def progress():
        return store.progress()

    @app.post("/api/audit")
    def audit(body: AuditBody):
        try:
            created = store.sample_audit(body.fraction, body.seed)
        except InvalidFraction as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"enqueued": created}

    if images_dir and Path(images_dir).is_dir():
        app.mount("/images", StaticFiles(directory=images_dir), name="images")
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
