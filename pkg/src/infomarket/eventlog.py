"""Append-only event journal.

Every state-mutating request of the exchange service becomes exactly one
event, durably appended (write + fsync) before the response goes out. The
log is the system of record: replaying it from seq 1 reconstructs the full
service state deterministically.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


class EventLogError(Exception):
    pass


class SequenceGap(EventLogError):
    pass


class CorruptEvent(EventLogError):
    pass


class StorageFailure(EventLogError):
    pass


class EventKind:
    REGISTERED = "Registered"
    FUNDED = "Funded"
    QUESTION_CREATED = "QuestionCreated"
    QUESTION_POSTED = "QuestionPosted"
    ACCEPTED = "Accepted"
    ANSWERED = "Answered"
    EVIDENCE_SUBMITTED = "EvidenceSubmitted"
    ADJUDICATED = "Adjudicated"
    SETTLED = "Settled"
    TIME_ADVANCED = "TimeAdvanced"

    ALL = frozenset(
        {
            REGISTERED,
            FUNDED,
            QUESTION_CREATED,
            QUESTION_POSTED,
            ACCEPTED,
            ANSWERED,
            EVIDENCE_SUBMITTED,
            ADJUDICATED,
            SETTLED,
            TIME_ADVANCED,
        }
    )


@dataclass(frozen=True, slots=True)
class Event:
    seq: int
    kind: str
    payload: dict
    recorded_at: int

    def to_json(self) -> str:
        # Payload keys sorted so identical logs serialize byte-identically.
        return json.dumps(
            {
                "seq": self.seq,
                "kind": self.kind,
                "payload": self.payload,
                "recorded_at": self.recorded_at,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Event":
        try:
            rec = json.loads(line)
            return cls(
                seq=int(rec["seq"]),
                kind=str(rec["kind"]),
                payload=dict(rec["payload"]),
                recorded_at=int(rec["recorded_at"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptEvent(f"unreadable event line: {exc}") from exc


class EventLog:
    """Gapless, append-only journal, optionally backed by a JSONL file."""

    def __init__(
        self, path: Optional[Path] = None, preloaded: Optional[list[Event]] = None
    ) -> None:
        """``preloaded`` adopts events assumed to already be in the file."""
        self.path = Path(path) if path is not None else None
        self._events: list[Event] = list(preloaded) if preloaded else []
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, kind: str, payload: dict, recorded_at: int) -> Event:
        if kind not in EventKind.ALL:
            raise CorruptEvent(f"unknown event kind {kind!r}")
        event = Event(
            seq=len(self._events) + 1,
            kind=kind,
            payload=payload,
            recorded_at=recorded_at,
        )
        return self.append_event(event)

    def append_event(self, event: Event) -> Event:
        """Durably append; the event must carry the next sequence number."""
        if event.seq != len(self._events) + 1:
            raise SequenceGap(
                f"expected seq {len(self._events) + 1}, got {event.seq}"
            )
        if self._fh is not None:
            try:
                self._fh.write(event.to_json() + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"cannot persist event {event.seq}: {exc}") from exc
        self._events.append(event)
        return event

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @staticmethod
    def read(path: Path) -> list[Event]:
        """Load and validate a log file: gapless sequence from 1."""
        events: list[Event] = []
        text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            if not line.strip():
                continue
            events.append(Event.from_json(line))
        for expected, event in enumerate(events, start=1):
            if event.seq != expected:
                raise SequenceGap(f"expected seq {expected}, got {event.seq}")
        return events
