"""Human review backend: leased work queue, four-point rubric decisions,
append-only event log, and consistency audits.

Persistence is event-sourced: every enqueue and decision is one JSON line in
the log, and replaying the log rebuilds item statuses exactly. Leases are
in-memory only (an expired or lost lease simply returns the item to the
queue), so a restart never strands work.

Accepting requires all four rubric flags; rejecting requires a reason
(a false flag or a note). Both are enforced here regardless of the client.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field, replace

from .errors import (
    AlreadyDecided,
    InvalidFraction,
    NotLeasedToYou,
    NoWork,
    RubricVerdictMismatch,
    UnknownItem,
)

__all__ = ["Rubric", "ReviewItem", "ReviewDecision", "ReviewStore",
           "DEFAULT_LEASE_TTL_S", "RUBRIC_FLAGS"]

DEFAULT_LEASE_TTL_S = 600.0
RUBRIC_FLAGS = ("object_recognition", "spatial_logic", "mask_quality", "grammar")
STAGES = ("mask_review", "qa_review")


@dataclass(frozen=True)
class Rubric:
    object_recognition: bool
    spatial_logic: bool
    mask_quality: bool
    grammar: bool

    @property
    def all_true(self) -> bool:
        return all(getattr(self, f) for f in RUBRIC_FLAGS)

    def to_json(self) -> dict:
        return {f: getattr(self, f) for f in RUBRIC_FLAGS}

    @classmethod
    def from_json(cls, obj: dict) -> "Rubric":
        return cls(**{f: bool(obj[f]) for f in RUBRIC_FLAGS})


@dataclass(frozen=True)
class ReviewItem:
    item_id: str
    image_path: str
    masks: tuple[dict, ...]  # RLE JSON objects for overlay rendering
    instruction: str
    answer: str
    source_stage: str  # mask_review | qa_review
    audit_of: str | None = None

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "image_path": self.image_path,
            "masks": list(self.masks),
            "instruction": self.instruction,
            "answer": self.answer,
            "source_stage": self.source_stage,
            "audit_of": self.audit_of,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReviewItem":
        return cls(
            item_id=obj["item_id"],
            image_path=obj.get("image_path", ""),
            masks=tuple(obj.get("masks", ())),
            instruction=obj.get("instruction", ""),
            answer=obj.get("answer", ""),
            source_stage=obj.get("source_stage", "qa_review"),
            audit_of=obj.get("audit_of"),
        )


@dataclass(frozen=True)
class ReviewDecision:
    item_id: str
    reviewer_id: str
    rubric: Rubric
    verdict: str  # accept | reject
    notes: str
    timestamp: float

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "reviewer_id": self.reviewer_id,
            "rubric": self.rubric.to_json(),
            "verdict": self.verdict,
            "notes": self.notes,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReviewDecision":
        return cls(
            item_id=obj["item_id"],
            reviewer_id=obj["reviewer_id"],
            rubric=Rubric.from_json(obj["rubric"]),
            verdict=obj["verdict"],
            notes=obj.get("notes", ""),
            timestamp=float(obj.get("timestamp", 0.0)),
        )


@dataclass
class _Slot:
    item: ReviewItem
    leased_to: str | None = None
    lease_expiry: float = 0.0
    decisions: list[ReviewDecision] = field(default_factory=list)

    def status(self, now: float) -> str:
        if self.decisions:
            return "decided"
        if self.leased_to is not None and self.lease_expiry > now:
            return "leased"
        return "pending"


class ReviewStore:
    """Thread-safe queue with single-writer discipline.

    ``clock`` is injectable for tests; ``log_path`` enables persistence
    (appended on every state change, replayable via :meth:`replay`).
    """

    def __init__(self, log_path=None, lease_ttl_s: float = DEFAULT_LEASE_TTL_S,
                 clock=time.time):
        self._lock = threading.Lock()
        self._slots: dict[str, _Slot] = {}
        self._order: list[str] = []  # FIFO enqueue order
        self._log_path = log_path
        self._lease_ttl = lease_ttl_s
        self._clock = clock

    # -- persistence ---------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def replay(cls, log_path, lease_ttl_s: float = DEFAULT_LEASE_TTL_S,
               clock=time.time, attach: bool = True) -> "ReviewStore":
        """Rebuild a store from its event log.

        Undecided items come back pending (leases are not persisted). With
        ``attach=False`` the rebuilt store does not append to the log, which
        is what the state-equivalence tests use.
        """
        store = cls(log_path=log_path if attach else None,
                    lease_ttl_s=lease_ttl_s, clock=clock)
        try:
            with open(log_path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except FileNotFoundError:
            return store
        for raw in lines:
            raw = raw.strip()
            if not raw:
                continue
            event = json.loads(raw)
            if event["event"] == "enqueue":
                item = ReviewItem.from_json(event["item"])
                store._slots[item.item_id] = _Slot(item)
                store._order.append(item.item_id)
            elif event["event"] == "decision":
                decision = ReviewDecision.from_json(event["decision"])
                store._slots[decision.item_id].decisions.append(decision)
        return store

    # -- queue operations ----------------------------------------------------

    def enqueue(self, item: ReviewItem) -> None:
        with self._lock:
            if item.item_id in self._slots:
                raise ValueError(f"item {item.item_id!r} already enqueued")
            self._slots[item.item_id] = _Slot(item)
            self._order.append(item.item_id)
            self._append_event({"event": "enqueue", "item": item.to_json()})

    def next_item(self, reviewer_id: str) -> tuple[ReviewItem, float]:
        """Lease the oldest pending item; expired leases are re-grantable.

        Returns (item, lease_expiry). Raises NoWork when nothing is pending.
        """
        if not reviewer_id:
            raise ValueError("reviewer id must be non-empty")
        now = self._clock()
        with self._lock:
            for item_id in self._order:
                slot = self._slots[item_id]
                if slot.status(now) == "pending":
                    slot.leased_to = reviewer_id
                    slot.lease_expiry = now + self._lease_ttl
                    return slot.item, slot.lease_expiry
        raise NoWork("queue has no pending item")

    def get_item(self, item_id: str) -> ReviewItem:
        with self._lock:
            slot = self._slots.get(item_id)
            if slot is None:
                raise UnknownItem(f"no item {item_id!r}")
            return slot.item

    def submit_decision(self, decision: ReviewDecision, revise: bool = False) -> dict:
        """Record a decision for an item leased to this reviewer.

        Mask-review items use the reduced rubric: only mask_quality is under
        review, the other flags are forced true server-side.
        """
        now = self._clock()
        with self._lock:
            slot = self._slots.get(decision.item_id)
            if slot is None:
                raise UnknownItem(f"no item {decision.item_id!r}")
            status = slot.status(now)
            if status == "decided":
                if not revise:
                    raise AlreadyDecided(f"item {decision.item_id!r} already decided")
                if slot.decisions[-1].reviewer_id != decision.reviewer_id:
                    raise NotLeasedToYou("only the deciding reviewer may revise")
            else:
                if slot.leased_to != decision.reviewer_id or slot.lease_expiry <= now:
                    raise NotLeasedToYou(
                        f"item {decision.item_id!r} is not leased to "
                        f"{decision.reviewer_id!r}")

            if slot.item.source_stage == "mask_review":
                decision = replace(decision, rubric=replace(
                    decision.rubric,
                    object_recognition=True, spatial_logic=True, grammar=True))

            if decision.verdict == "accept" and not decision.rubric.all_true:
                raise RubricVerdictMismatch("accept requires all four rubric flags")
            if decision.verdict == "reject" and decision.rubric.all_true \
                    and not decision.notes.strip():
                raise RubricVerdictMismatch(
                    "reject requires a false rubric flag or a note")
            if decision.verdict not in ("accept", "reject"):
                raise RubricVerdictMismatch(f"unknown verdict {decision.verdict!r}")

            slot.decisions.append(decision)
            slot.leased_to = None
            slot.lease_expiry = 0.0
            self._append_event({"event": "decision", "decision": decision.to_json()})
            return {"item_id": decision.item_id, "verdict": decision.verdict,
                    "revision": len(slot.decisions)}

    # -- reporting -----------------------------------------------------------

    def progress(self) -> dict:
        now = self._clock()
        with self._lock:
            counts = {"pending": 0, "leased": 0, "accepted": 0, "rejected": 0}
            for slot in self._slots.values():
                status = slot.status(now)
                if status == "decided":
                    verdict = slot.decisions[-1].verdict
                    counts["accepted" if verdict == "accept" else "rejected"] += 1
                else:
                    counts[status] += 1
            decided = counts["accepted"] + counts["rejected"]
            counts["acceptance_rate"] = (
                counts["accepted"] / decided if decided else None)
            return counts

    def sample_audit(self, fraction: float, seed: int) -> list[str]:
        """Re-enqueue a seeded sample of accepted items for a second pass.

        Audit decisions are recorded like any other; they never override the
        original decision.
        """
        if not 0 < fraction <= 1:
            raise InvalidFraction(f"fraction must be in (0, 1], got {fraction}")
        now = self._clock()
        with self._lock:
            accepted = [
                item_id for item_id in self._order
                if self._slots[item_id].status(now) == "decided"
                and self._slots[item_id].decisions[-1].verdict == "accept"
                and self._slots[item_id].item.audit_of is None
            ]
            count = round(fraction * len(accepted))
            chosen = sorted(random.Random(seed).sample(accepted, count))
            created = []
            for item_id in chosen:
                source = self._slots[item_id].item
                audit_id = f"{item_id}#audit"
                suffix = 1
                while audit_id in self._slots:
                    suffix += 1
                    audit_id = f"{item_id}#audit{suffix}"
                audit_item = replace(source, item_id=audit_id, audit_of=item_id)
                self._slots[audit_id] = _Slot(audit_item)
                self._order.append(audit_id)
                self._append_event({"event": "enqueue", "item": audit_item.to_json()})
                created.append(audit_id)
            return created

    def state_dict(self) -> dict:
        """Canonical snapshot of item statuses and decisions (for the
        replay-equivalence check and debugging)."""
        now = self._clock()
        with self._lock:
            return {
                "items": {
                    item_id: {
                        "status": self._slots[item_id].status(now),
                        "decisions": [d.to_json() for d in self._slots[item_id].decisions],
                    }
                    for item_id in self._order
                },
                "order": list(self._order),
            }

    def state_bytes(self) -> bytes:
        return json.dumps(self.state_dict(), sort_keys=True).encode()
