"""The running sequential trial: a resumable curtailed-stopping state machine.

Observations arrive as a stream of binary outcomes; the trial stops and
rejects the moment the side-effect count reaches k*+1, or completes without
rejection when the maximal sample size N* is reached first.  Batching is I/O
convenience only; the rule is applied per observation, in sequence order.

Durable formats (part of the stable interface):
  * event log: newline-delimited JSON records
        {"seq": int, "subject": str, "outcome": 0|1, "ts": optional RFC3339}
  * snapshot: single JSON record with format_version 1, integer counters,
    the design embedded in full, and a sha256 checksum.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

from .design import TestDesign

__all__ = [
    "Observation",
    "Status",
    "Decision",
    "MonitorState",
    "ObserveResult",
    "MonitorError",
    "TerminalStateError",
    "SequenceGapError",
    "DuplicateSequenceError",
    "EventLogError",
    "SnapshotError",
    "SnapshotCorruptionError",
    "SnapshotVersionError",
    "monitor_new",
    "observe",
    "feed_outcomes",
    "decision",
    "persist",
    "restore",
    "read_event_log",
]

SNAPSHOT_FORMAT_VERSION = 1


class MonitorError(Exception):
    pass


class TerminalStateError(MonitorError):
    """observe() called on a trial that already reached a terminal status."""


class SequenceGapError(MonitorError):
    """Non-contiguous sequence number in the observation stream."""


class DuplicateSequenceError(MonitorError):
    """Repeated sequence number in the observation stream."""


class EventLogError(MonitorError):
    """Malformed event-log record."""


class SnapshotError(MonitorError):
    pass


class SnapshotCorruptionError(SnapshotError):
    """Checksum mismatch or truncated/unparseable snapshot."""


class SnapshotVersionError(SnapshotError):
    """Unknown snapshot format version."""


class Status(enum.Enum):
    RUNNING = "running"
    STOPPED_REJECTED = "stopped_rejected"
    COMPLETED_NOT_REJECTED = "completed_not_rejected"


class Decision(enum.Enum):
    REJECT_H0 = "RejectH0"
    NOT_REJECT_H0 = "NotRejectH0"
    CONTINUE = "Continue"


@dataclass(frozen=True)
class Observation:
    subject_id: str
    outcome: int
    sequence_no: int
    ts: Optional[str] = None  # logged, never used in the statistic

    def __post_init__(self) -> None:
        if self.outcome not in (0, 1):
            raise EventLogError(f"outcome must be 0 or 1, got {self.outcome!r}")
        if self.sequence_no < 1:
            raise EventLogError(f"sequence_no must be >= 1, got {self.sequence_no}")


@dataclass(frozen=True)
class MonitorState:
    design: TestDesign
    n: int
    s_n: int
    status: Status
    m_star: Optional[int] = None


@dataclass(frozen=True)
class ObserveResult:
    state: MonitorState
    consumed: int
    unconsumed: int  # batch items after the stopping observation


def monitor_new(design: TestDesign) -> MonitorState:
    return MonitorState(design=design, n=0, s_n=0, status=Status.RUNNING)


def feed_outcomes(state: MonitorState, outcomes: np.ndarray) -> ObserveResult:
    """Apply a contiguous block of 0/1 outcomes; fast path without metadata.

    Same transition semantics as observe(): processing truncates at the
    stopping observation or at N*, whichever comes first.
    """
    if state.status is not Status.RUNNING:
        raise TerminalStateError(f"trial already terminal ({state.status.value})")
    design = state.design
    room = design.n_star - state.n
    block = np.asarray(outcomes, dtype=np.int64)[:room]
    need = design.k_star + 1 - state.s_n
    cum = np.cumsum(block)
    hit = np.nonzero(cum >= need)[0]
    if hit.size:
        stop_idx = int(hit[0])  # index of the (k*+1)-th side effect
        n = state.n + stop_idx + 1
        new = MonitorState(
            design=design,
            n=n,
            s_n=design.k_star + 1,
            status=Status.STOPPED_REJECTED,
            m_star=n,
        )
        consumed = stop_idx + 1
        return ObserveResult(new, consumed, len(outcomes) - consumed)
    n = state.n + len(block)
    s = state.s_n + (int(cum[-1]) if len(block) else 0)
    if n == design.n_star:
        new = MonitorState(
            design=design,
            n=n,
            s_n=s,
            status=Status.COMPLETED_NOT_REJECTED,
            m_star=design.n_star,
        )
    else:
        new = MonitorState(design=design, n=n, s_n=s, status=Status.RUNNING)
    return ObserveResult(new, len(block), len(outcomes) - len(block))


def observe(state: MonitorState, batch: Sequence[Observation]) -> ObserveResult:
    """Process a batch of observations in sequence order.

    Sequence numbers must continue contiguously from the current count;
    duplicates and gaps are hard errors (audit integrity), never reconciled.
    """
    if state.status is not Status.RUNNING:
        raise TerminalStateError(f"trial already terminal ({state.status.value})")
    expected = state.n + 1
    seen = set()
    for obs in batch:
        if obs.sequence_no in seen or obs.sequence_no <= state.n:
            raise DuplicateSequenceError(f"duplicate sequence_no {obs.sequence_no}")
        seen.add(obs.sequence_no)
        if obs.sequence_no != expected:
            raise SequenceGapError(
                f"expected sequence_no {expected}, got {obs.sequence_no}"
            )
        expected += 1
    outcomes = np.fromiter((o.outcome for o in batch), dtype=np.int64, count=len(batch))
    return feed_outcomes(state, outcomes)


def decision(state: MonitorState) -> Decision:
    if state.status is Status.STOPPED_REJECTED:
        return Decision.REJECT_H0
    if state.status is Status.COMPLETED_NOT_REJECTED:
        return Decision.NOT_REJECT_H0
    return Decision.CONTINUE


def _canonical(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def persist(state: MonitorState) -> bytes:
    """Serialize to a versioned, checksummed single-record JSON snapshot."""
    body = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "design": state.design.to_dict(),
        "n": state.n,
        "s_n": state.s_n,
        "status": state.status.value,
        "m_star": state.m_star,
    }
    body["checksum"] = hashlib.sha256(_canonical(body).encode()).hexdigest()
    return (_canonical(body) + "\n").encode()


def restore(snapshot: bytes) -> MonitorState:
    try:
        body = json.loads(snapshot.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise SnapshotCorruptionError(f"unparseable snapshot: {exc}") from exc
    if not isinstance(body, dict) or "checksum" not in body:
        raise SnapshotCorruptionError("snapshot missing checksum")
    claimed = body.pop("checksum")
    if hashlib.sha256(_canonical(body).encode()).hexdigest() != claimed:
        raise SnapshotCorruptionError("snapshot checksum mismatch")
    if body.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotVersionError(
            f"unknown snapshot format version {body.get('format_version')!r}"
        )
    return MonitorState(
        design=TestDesign.from_dict(body["design"]),
        n=int(body["n"]),
        s_n=int(body["s_n"]),
        status=Status(body["status"]),
        m_star=None if body["m_star"] is None else int(body["m_star"]),
    )


def read_event_log(lines: Iterable[str]) -> Iterator[Observation]:
    """Parse newline-delimited JSON event records into Observations."""
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except ValueError as exc:
            raise EventLogError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise EventLogError(f"line {lineno}: record must be an object")
        unknown = set(rec) - {"seq", "subject", "outcome", "ts"}
        if unknown:
            raise EventLogError(f"line {lineno}: unknown keys {sorted(unknown)}")
        try:
            yield Observation(
                subject_id=str(rec["subject"]),
                outcome=int(rec["outcome"]),
                sequence_no=int(rec["seq"]),
                ts=rec.get("ts"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EventLogError(f"line {lineno}: bad record: {exc}") from exc
