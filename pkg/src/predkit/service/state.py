"""Campaign state: proposal leases, decision fold, annotation export.

All mutation goes through a single lock and the append-only log; state is
a pure fold over the log records, so replaying the log after a crash
reproduces exactly the state (and therefore the export) that wrote it.
Leases are deliberately not persisted: after a restart an undecided
proposal simply becomes eligible again.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from ..dataset import (
    Dataset,
    ImageRecord,
    Polarity,
    RelationTriplet,
    SegmentedObject,
    load_dataset,
)
from ..errors import (
    DuplicateDecisionError,
    LeaseExpiredError,
    UnknownProposalError,
    UnknownSessionError,
)
from ..proposals import Proposal, load_proposals
from .log import DecisionLog

__all__ = [
    "Decision",
    "TERMINAL_DECISIONS",
    "AnnotationDecision",
    "Session",
    "CampaignState",
    "CampaignService",
    "DEFAULT_LEASE_TTL",
]

DEFAULT_LEASE_TTL = 600.0


class Decision(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NO_RELATION = "no_relation"
    SKIP = "skip"
    FAULTY_SUBJECT = "faulty_subject"
    FAULTY_OBJECT = "faulty_object"


TERMINAL_DECISIONS = frozenset(
    {
        Decision.POSITIVE,
        Decision.NEGATIVE,
        Decision.NO_RELATION,
        Decision.FAULTY_SUBJECT,
        Decision.FAULTY_OBJECT,
    }
)


@dataclass(frozen=True)
class AnnotationDecision:
    """One annotator judgement on one proposal."""

    proposal_id: str
    decision: Decision
    annotator_id: str
    timestamp: float


@dataclass
class Session:
    session_id: str
    annotator_id: str
    predicate_id: int


@dataclass
class _Lease:
    session_id: str
    expires_at: float


@dataclass
class CampaignState:
    """Pure fold of the decision log over a base dataset and proposal queue."""

    dataset: Dataset
    queue: list[Proposal]
    decided: dict[str, dict] = field(default_factory=dict)
    conflicts: list[dict] = field(default_factory=list)
    skipped_by: dict[str, set[str]] = field(default_factory=dict)
    faulty_objects: set[tuple[str, int]] = field(default_factory=set)
    # subset of faulty_objects flagged during this campaign (the export
    # only covers campaign activity, not flags inherited from the base)
    campaign_faulty: set[tuple[str, int]] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.by_id = {p.proposal_id: p for p in self.queue}
        # objects flagged faulty in the base dataset are excluded from the start
        for img in self.dataset.images:
            for obj in img.objects:
                if obj.is_faulty:
                    self.faulty_objects.add((img.image_id, obj.object_id))

    def apply(self, record: dict) -> None:
        """Fold one log record into the state; must stay deterministic."""
        kind = record.get("kind")
        if kind == "decision":
            decision = Decision(record["decision"])
            if decision is Decision.SKIP:
                self.skipped_by.setdefault(record["proposal_id"], set()).add(
                    record["annotator_id"]
                )
                return
            previous = self.decided.get(record["proposal_id"])
            if previous is not None:
                # late submission after a lease expired: first decision wins
                self.conflicts.append({"first": previous, "second": record})
                return
            self.decided[record["proposal_id"]] = record
            if decision is Decision.FAULTY_SUBJECT:
                self._flag(record["image_id"], record["subject_idx"])
            elif decision is Decision.FAULTY_OBJECT:
                self._flag(record["image_id"], record["object_idx"])
        elif kind == "faulty":
            self._flag(record["image_id"], record["object_idx"])
        else:
            raise ValueError(f"unknown log record kind: {kind!r}")

    def _flag(self, image_id: str, object_idx: int) -> None:
        self.faulty_objects.add((image_id, object_idx))
        self.campaign_faulty.add((image_id, object_idx))

    def is_withdrawn(self, proposal: Proposal) -> bool:
        return (proposal.image_id, proposal.subject_idx) in self.faulty_objects or (
            proposal.image_id,
            proposal.object_idx,
        ) in self.faulty_objects

    def queue_for(self, predicate_id: int) -> list[Proposal]:
        return [p for p in self.queue if p.predicate_id == predicate_id]


def recover(dataset: Dataset, queue: list[Proposal], log_bytes: bytes) -> CampaignState:
    """Rebuild campaign state by folding raw log bytes.

    A torn trailing record is discarded with a warning; corruption before
    that raises CorruptLogError.  Folding the same records the live
    service wrote yields an identical state, hence an identical export.
    """
    from .log import read_log

    state = CampaignState(dataset=dataset, queue=list(queue))
    for record in read_log(log_bytes):
        state.apply(record)
    return state


def _decision_record(
    proposal: Proposal, decision: Decision, annotator_id: str, timestamp: float
) -> dict:
    return {
        "kind": "decision",
        "proposal_id": proposal.proposal_id,
        "image_id": proposal.image_id,
        "subject_idx": proposal.subject_idx,
        "object_idx": proposal.object_idx,
        "predicate_id": proposal.predicate_id,
        "decision": decision.value,
        "annotator_id": annotator_id,
        "timestamp": timestamp,
    }


class CampaignService:
    """Thread-safe campaign orchestration used by the HTTP handlers.

    The lease table is the only contended structure; it is updated
    atomically with log appends under one lock.  A proposal is leased to at
    most one live session at a time.
    """

    def __init__(
        self,
        dataset: Dataset,
        queue: list[Proposal],
        log: DecisionLog,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock: Callable[[], float] = time.time,
    ):
        self.state = CampaignState(dataset=dataset, queue=list(queue))
        self.log = log
        self.lease_ttl = lease_ttl
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self.leases: dict[str, _Lease] = {}
        self._lock = threading.Lock()
        for record in log.replay():
            self.state.apply(record)

    @classmethod
    def open(
        cls,
        campaign_dir: str | Path,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock: Callable[[], float] = time.time,
        fsync: bool = True,
    ) -> "CampaignService":
        """Load a campaign directory: dataset.json, proposals.json, decisions.log."""
        campaign_dir = Path(campaign_dir)
        dataset = load_dataset(campaign_dir / "dataset.json")
        queue = load_proposals(campaign_dir / "proposals.json")
        log = DecisionLog(campaign_dir / "decisions.log", fsync=fsync)
        return cls(dataset=dataset, queue=queue, log=log, lease_ttl=lease_ttl, clock=clock)

    # -- sessions and leases -------------------------------------------------

    def open_session(self, annotator_id: str, predicate_id: int) -> Session:
        session = Session(
            session_id=uuid.uuid4().hex, annotator_id=annotator_id, predicate_id=predicate_id
        )
        with self._lock:
            self.sessions[session.session_id] = session
        return session

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return session

    def _lease_valid(self, proposal_id: str, session_id: str, now: float) -> bool:
        lease = self.leases.get(proposal_id)
        return lease is not None and lease.session_id == session_id and lease.expires_at > now

    def next_proposal(self, session_id: str) -> Proposal | None:
        """Lease the highest-ranked eligible proposal for the session's predicate.

        Eligible: undecided, not withdrawn by a faulty object, not currently
        leased elsewhere, and not previously skipped by this annotator.
        Returns None when the queue is exhausted.
        """
        with self._lock:
            session = self._session(session_id)
            now = self.clock()
            for proposal in self.state.queue:
                if proposal.predicate_id != session.predicate_id:
                    continue
                pid = proposal.proposal_id
                if pid in self.state.decided or self.state.is_withdrawn(proposal):
                    continue
                if session.annotator_id in self.state.skipped_by.get(pid, ()):
                    continue
                lease = self.leases.get(pid)
                if lease is not None and lease.expires_at > now and lease.session_id != session_id:
                    continue
                self.leases[pid] = _Lease(session_id=session_id, expires_at=now + self.lease_ttl)
                return proposal
            return None

    # -- decisions -------------------------------------------------------------

    def submit_decision(
        self, session_id: str, proposal_id: str, decision: Decision | str
    ) -> dict:
        """Record a decision; returns {"conflict": bool} acknowledgment.

        Requires a live lease.  Late submissions (lease expired) against an
        already-decided proposal are kept as conflicting decisions per the
        log; the first terminal decision stays authoritative.
        """
        decision = Decision(decision)
        with self._lock:
            session = self._session(session_id)
            proposal = self.state.by_id.get(proposal_id)
            if proposal is None:
                raise UnknownProposalError(f"unknown proposal {proposal_id!r}")
            now = self.clock()

            if not self._lease_valid(proposal_id, session_id, now):
                previous = self.state.decided.get(proposal_id)
                if previous is not None:
                    if previous["annotator_id"] == session.annotator_id:
                        raise DuplicateDecisionError(
                            f"{session.annotator_id} already decided {proposal_id}"
                        )
                    if decision in TERMINAL_DECISIONS:
                        record = _decision_record(proposal, decision, session.annotator_id, now)
                        self.state.apply(self.log.append(record))
                        return {"conflict": True}
                raise LeaseExpiredError(f"no live lease on {proposal_id} for this session")

            if self.state.is_withdrawn(proposal):
                self.leases.pop(proposal_id, None)
                raise LeaseExpiredError(f"{proposal_id} was withdrawn by a faulty-object flag")

            record = _decision_record(proposal, decision, session.annotator_id, now)
            self.state.apply(self.log.append(record))
            self.leases.pop(proposal_id, None)
            if decision in (Decision.FAULTY_SUBJECT, Decision.FAULTY_OBJECT):
                self._withdraw_leases_touching_faulty()
            return {"conflict": False}

    def flag_faulty_object(self, session_id: str, image_id: str, object_idx: int) -> None:
        """Directly mark an object faulty, withdrawing its pending proposals."""
        with self._lock:
            session = self._session(session_id)
            record = {
                "kind": "faulty",
                "image_id": image_id,
                "object_idx": object_idx,
                "annotator_id": session.annotator_id,
                "timestamp": self.clock(),
            }
            self.state.apply(self.log.append(record))
            self._withdraw_leases_touching_faulty()

    def _withdraw_leases_touching_faulty(self) -> None:
        for pid in list(self.leases):
            proposal = self.state.by_id.get(pid)
            if proposal is not None and self.state.is_withdrawn(proposal):
                del self.leases[pid]

    # -- reporting and export ----------------------------------------------------

    def stats(self) -> dict:
        """Per-predicate decision counts, positive ratios, and queue depths."""
        with self._lock:
            per_predicate: dict[int, dict] = {}
            for record in self.state.decided.values():
                p = record["predicate_id"]
                entry = per_predicate.setdefault(
                    p, {"positive": 0, "negative": 0, "no_relation": 0, "faulty": 0}
                )
                decision = Decision(record["decision"])
                if decision is Decision.POSITIVE:
                    entry["positive"] += 1
                elif decision is Decision.NEGATIVE:
                    entry["negative"] += 1
                elif decision is Decision.NO_RELATION:
                    entry["no_relation"] += 1
                else:
                    entry["faulty"] += 1
            now = self.clock()
            for p in sorted({q.predicate_id for q in self.state.queue}):
                entry = per_predicate.setdefault(
                    p, {"positive": 0, "negative": 0, "no_relation": 0, "faulty": 0}
                )
                pending = leased = 0
                for proposal in self.state.queue:
                    if proposal.predicate_id != p:
                        continue
                    pid = proposal.proposal_id
                    if pid in self.state.decided or self.state.is_withdrawn(proposal):
                        continue
                    pending += 1
                    lease = self.leases.get(pid)
                    if lease is not None and lease.expires_at > now:
                        leased += 1
                entry["queue_depth"] = pending
                entry["leased"] = leased
            for p, entry in per_predicate.items():
                terminal = (
                    entry["positive"] + entry["negative"] + entry["no_relation"] + entry["faulty"]
                )
                entry["predicate"] = self.state.dataset.categories.predicate_name(p)
                entry["terminal"] = terminal
                entry["positive_ratio"] = entry["positive"] / terminal if terminal else None
                entry.setdefault("queue_depth", 0)
                entry.setdefault("leased", 0)
            return {
                "predicates": {str(p): per_predicate[p] for p in sorted(per_predicate)},
                "decisions": len(self.state.decided),
                "conflicts": len(self.state.conflicts),
                "faulty_objects": len(self.state.faulty_objects),
            }

    def export_annotations(self) -> Dataset:
        with self._lock:
            return export_annotations(self.state)

    def export_training(self) -> Dataset:
        """Positives-only dataset for retraining the proposal model."""
        full = self.export_annotations()
        relations = {
            image_id: tuple(t for t in triplets if t.polarity is Polarity.POSITIVE)
            for image_id, triplets in full.relations.items()
        }
        images = tuple(img for img in full.images if relations.get(img.image_id))
        return Dataset(
            categories=full.categories,
            images=images,
            relations={img.image_id: relations[img.image_id] for img in images},
        )


def export_annotations(state: CampaignState) -> Dataset:
    """Build the annotation Dataset from all terminal decisions.

    ``no_relation`` expands to explicit negatives for every predicate class
    on the pair at export time (minus predicates positively decided on the
    same pair, which stay positive).  Relations touching objects flagged
    faulty are dropped so the result satisfies the dataset invariants.
    Images appear iff they carry at least one relation or faulty flag.
    """
    dataset = state.dataset
    n = dataset.categories.num_predicates

    positive: dict[str, set[tuple[int, int, int]]] = {}
    negative: dict[str, set[tuple[int, int, int]]] = {}
    no_relation_pairs: dict[str, set[tuple[int, int]]] = {}
    for record in state.decided.values():
        image_id = record["image_id"]
        pair = (record["subject_idx"], record["object_idx"])
        if (image_id, pair[0]) in state.faulty_objects or (
            image_id,
            pair[1],
        ) in state.faulty_objects:
            continue
        triplet = (pair[0], pair[1], record["predicate_id"])
        decision = Decision(record["decision"])
        if decision is Decision.POSITIVE:
            positive.setdefault(image_id, set()).add(triplet)
        elif decision is Decision.NEGATIVE:
            negative.setdefault(image_id, set()).add(triplet)
        elif decision is Decision.NO_RELATION:
            no_relation_pairs.setdefault(image_id, set()).add(pair)

    relations: dict[str, list[RelationTriplet]] = {}
    for image_id in sorted(set(positive) | set(negative) | set(no_relation_pairs)):
        triplets: list[RelationTriplet] = []
        pos = positive.get(image_id, set())
        neg = set(negative.get(image_id, set()))
        for s, o in sorted(no_relation_pairs.get(image_id, set())):
            for p in range(n):
                if (s, o, p) not in pos:
                    neg.add((s, o, p))
        for s, o, p in sorted(pos):
            triplets.append(RelationTriplet(s, o, p, Polarity.POSITIVE))
        for s, o, p in sorted(neg):
            triplets.append(RelationTriplet(s, o, p, Polarity.NEGATIVE))
        relations[image_id] = triplets

    images: list[ImageRecord] = []
    for img in dataset.images:
        flagged = {
            obj_idx for (image_id, obj_idx) in state.campaign_faulty if image_id == img.image_id
        }
        if not relations.get(img.image_id) and not flagged:
            continue
        objects = tuple(
            SegmentedObject(
                object_id=obj.object_id,
                category_id=obj.category_id,
                mask=obj.mask,
                is_faulty=obj.is_faulty or obj.object_id in flagged,
                extra=obj.extra,
            )
            for obj in img.objects
        )
        images.append(
            ImageRecord(
                image_id=img.image_id,
                file_name=img.file_name,
                width=img.width,
                height=img.height,
                objects=objects,
                cluster_id=img.cluster_id,
                extra=img.extra,
            )
        )
    return Dataset(
        categories=dataset.categories,
        images=tuple(images),
        relations={img.image_id: tuple(relations.get(img.image_id, ())) for img in images},
    )
