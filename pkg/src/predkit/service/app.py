"""HTTP API serving proposals to annotators and recording their decisions.

JSON over HTTP; the browser UI consumes exactly this surface.  Images and
the static UI bundle are served from configurable directories so the whole
annotation campaign runs from one process.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..dataset import export_dataset
from ..errors import (
    DuplicateDecisionError,
    LeaseExpiredError,
    PredkitError,
    UnknownProposalError,
    UnknownSessionError,
)
from ..proposals import Proposal
from .state import CampaignService, Decision

__all__ = ["create_app"]

_STATUS = {
    UnknownSessionError: 404,
    UnknownProposalError: 404,
    LeaseExpiredError: 409,
    DuplicateDecisionError: 409,
}


class SessionRequest(BaseModel):
    annotator_id: str
    predicate_id: int


class DecisionRequest(BaseModel):
    session_id: str
    proposal_id: str
    decision: str


class FaultyObjectRequest(BaseModel):
    session_id: str
    image_id: str
    object_idx: int


def _error(exc: PredkitError) -> HTTPException:
    return HTTPException(
        status_code=_STATUS.get(type(exc), 400),
        detail={"category": exc.category, "message": str(exc)},
    )


def create_app(
    service: CampaignService,
    images_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="predkit annotation service")
    dataset = service.state.dataset

    def proposal_payload(proposal: Proposal) -> dict:
        img = dataset.image(proposal.image_id)
        subject = img.objects[proposal.subject_idx]
        obj = img.objects[proposal.object_idx]
        remaining = sum(
            1
            for p in service.state.queue
            if p.predicate_id == proposal.predicate_id
            and p.proposal_id not in service.state.decided
            and not service.state.is_withdrawn(p)
        )
        return {
            "proposal_id": proposal.proposal_id,
            "image_id": proposal.image_id,
            "image_url": f"/images/{img.file_name}",
            "width": img.width,
            "height": img.height,
            "predicate_id": proposal.predicate_id,
            "display_name": dataset.categories.display_name(proposal.predicate_id),
            "subject": {
                "object_idx": proposal.subject_idx,
                "category": dataset.categories.object_name(subject.category_id),
                "mask": subject.mask,
            },
            "object": {
                "object_idx": proposal.object_idx,
                "category": dataset.categories.object_name(obj.category_id),
                "mask": obj.mask,
            },
            "remaining": remaining,
        }

    @app.post("/api/sessions")
    def open_session(request: SessionRequest) -> dict:
        if not 0 <= request.predicate_id < dataset.categories.num_predicates:
            raise HTTPException(404, detail={"category": "unknown-predicate"})
        session = service.open_session(request.annotator_id, request.predicate_id)
        return {
            "session_id": session.session_id,
            "predicate_id": session.predicate_id,
            "display_name": dataset.categories.display_name(session.predicate_id),
        }

    @app.get("/api/next")
    def next_proposal(session_id: str) -> dict:
        try:
            proposal = service.next_proposal(session_id)
        except PredkitError as exc:
            raise _error(exc) from exc
        if proposal is None:
            return {"proposal": None}
        return {"proposal": proposal_payload(proposal)}

    @app.post("/api/decisions")
    def submit_decision(request: DecisionRequest) -> dict:
        try:
            decision = Decision(request.decision)
        except ValueError:
            raise HTTPException(
                422, detail={"category": "bad-decision", "message": request.decision}
            ) from None
        try:
            ack = service.submit_decision(request.session_id, request.proposal_id, decision)
        except PredkitError as exc:
            raise _error(exc) from exc
        return {"status": "ok", **ack}

    @app.post("/api/faulty-objects")
    def flag_faulty(request: FaultyObjectRequest) -> dict:
        try:
            service.flag_faulty_object(request.session_id, request.image_id, request.object_idx)
        except PredkitError as exc:
            raise _error(exc) from exc
        return {"status": "ok"}

    @app.get("/api/predicates")
    def predicates() -> dict:
        stats = service.stats()
        entries = []
        for key, entry in stats["predicates"].items():
            p = int(key)
            entries.append(
                {
                    "predicate_id": p,
                    "name": dataset.categories.predicate_name(p),
                    "display_name": dataset.categories.display_name(p),
                    "queue_depth": entry["queue_depth"],
                    "terminal": entry["terminal"],
                    "positive_ratio": entry["positive_ratio"],
                }
            )
        entries.sort(key=lambda e: -e["queue_depth"])
        return {"predicates": entries}

    @app.get("/api/stats")
    def stats() -> dict:
        return service.stats()

    @app.get("/api/export")
    def export() -> Response:
        data = export_dataset(service.export_annotations())
        return Response(content=data, media_type="application/json")

    @app.get("/api/export/training")
    def export_training() -> Response:
        data = export_dataset(service.export_training(), include_extensions=False)
        return Response(content=data, media_type="application/json")

    if images_dir is not None:
        app.mount("/images", StaticFiles(directory=str(images_dir)), name="images")
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
