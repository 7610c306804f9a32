"""Simulated message fabric with per-link, per-phase byte accounting.

The key center, the two servers and the users exchange messages through
one in-process fabric.  Delivery is FIFO per ordered link and fully
deterministic: there is no real networking, the fabric exists to give the
protocols an auditable wire.  Every send charges the ledger with the exact
payload length; the fixed 16-byte message header (sender, receiver, phase,
kind) is tracked separately and excluded from payload accounting.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

HEADER_BYTES = 16

PHASE_KEY_DISTRIBUTION = "KeyDistribution"
PHASE_MODEL_BROADCAST = "ModelBroadcast"
PHASE_UPLOAD = "Upload"
PHASE_SEC_DIS = "SecDis"
PHASE_SEC_SEL = "SecSel"
PHASE_SEC_REP = "SecRep"

PHASES = (
    PHASE_KEY_DISTRIBUTION,
    PHASE_MODEL_BROADCAST,
    PHASE_UPLOAD,
    PHASE_SEC_DIS,
    PHASE_SEC_SEL,
    PHASE_SEC_REP,
)

DEFENSE_PHASES = (PHASE_SEC_DIS, PHASE_SEC_SEL, PHASE_SEC_REP)


class DeadlockError(RuntimeError):
    """recv was called on an empty queue with no pending sender."""


@dataclass(frozen=True, order=True)
class PartyId:
    """One of: key center, server 1, server 2, or user #index."""

    role: str  # "KC" | "S1" | "S2" | "U"
    index: int = 0

    def __str__(self) -> str:
        return f"{self.role}{self.index}" if self.role == "U" else self.role


KC = PartyId("KC")
S1 = PartyId("S1")
S2 = PartyId("S2")


def user(index: int) -> PartyId:
    return PartyId("U", index)


@dataclass(frozen=True)
class Message:
    sender: PartyId
    receiver: PartyId
    phase: str
    kind: str
    payload: bytes


@dataclass
class CommLedger:
    """Cumulative payload bytes and message counts per (link, phase).

    ``instances`` counts protocol executions (e.g. one blinded-distance
    computation) rather than messages; it backs the pair-count checks.
    Snapshots freeze per-round deltas for CSV export.
    """

    payload_bytes: dict = field(default_factory=lambda: defaultdict(int))
    message_counts: dict = field(default_factory=lambda: defaultdict(int))
    instances: dict = field(default_factory=lambda: defaultdict(int))
    round_rows: list = field(default_factory=list)
    _round: int = 0
    _round_start: dict = field(default_factory=dict)
    _round_start_instances: dict = field(default_factory=dict)

    def record(self, link: str, phase: str, nbytes: int) -> None:
        self.payload_bytes[(link, phase)] += nbytes
        self.message_counts[(link, phase)] += 1

    def count_instance(self, phase: str) -> None:
        self.instances[phase] += 1

    def total_bytes(self, phases=None) -> int:
        return sum(
            b for (_, phase), b in self.payload_bytes.items() if phases is None or phase in phases
        )

    def start_round(self, round_index: int) -> None:
        self._flush_round()
        self._round = round_index
        self._round_start = dict(self.payload_bytes)
        self._round_start_instances = dict(self.instances)

    def _flush_round(self) -> None:
        for (link, phase), total in sorted(self.payload_bytes.items()):
            delta = total - self._round_start.get((link, phase), 0)
            if delta:
                self.round_rows.append((self._round, link, phase, delta))

    def round_instances(self, phase: str) -> int:
        """Protocol executions of ``phase`` since the current round started."""
        return self.instances[phase] - self._round_start_instances.get(phase, 0)

    def finish(self) -> None:
        self._flush_round()
        self._round_start = dict(self.payload_bytes)

    def to_csv(self) -> str:
        lines = ["round,link,phase,bytes"]
        for row in self.round_rows:
            lines.append(",".join(str(x) for x in row))
        return "\n".join(lines) + "\n"


class Fabric:
    """Deterministic FIFO message fabric between the simulation parties."""

    def __init__(self, record_trace: bool = False):
        self.ledger = CommLedger()
        self._queues: dict[PartyId, deque[Message]] = defaultdict(deque)
        self.trace: list[Message] | None = [] if record_trace else None

    def send(self, msg: Message) -> None:
        link = f"{msg.sender}->{msg.receiver}"
        self.ledger.record(link, msg.phase, len(msg.payload))
        self._queues[msg.receiver].append(msg)
        if self.trace is not None:
            self.trace.append(msg)

    def recv(self, party: PartyId) -> Message:
        queue = self._queues[party]
        if not queue:
            raise DeadlockError(f"{party} has no queued message; protocol deadlock")
        return queue.popleft()

    def pending(self, party: PartyId) -> int:
        return len(self._queues[party])

    def ledger_snapshot(self) -> CommLedger:
        """Frozen copy of the current accounting state."""
        return CommLedger(
            payload_bytes=defaultdict(int, self.ledger.payload_bytes),
            message_counts=defaultdict(int, self.ledger.message_counts),
            instances=defaultdict(int, self.ledger.instances),
            round_rows=list(self.ledger.round_rows),
        )
