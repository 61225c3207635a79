"""Step-by-step simulator for online policies under preemption-restart.

Each step: admit arrivals, drop packets that can no longer finish, ask the
policy for one decision, apply it, then spend the step's channel quality on the
running packet.  An aborted packet goes back to the pending set with no
progress.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .model import (
    ABORTED,
    COMPLETED,
    QUALITY_EPS,
    FadeTrace,
    Instance,
    Packet,
    ScheduleOutcome,
    Transmission,
    completion_table,
    validate_outcome,
)


class VisibilityMode(str, enum.Enum):
    FADE_KNOWN = "fade_known"
    FADE_UNKNOWN = "fade_unknown_with_commit_oracle"

    @classmethod
    def parse(cls, text: str) -> "VisibilityMode":
        aliases = {"fade_known": cls.FADE_KNOWN, "known": cls.FADE_KNOWN,
                   "fade_unknown": cls.FADE_UNKNOWN, "unknown": cls.FADE_UNKNOWN,
                   cls.FADE_UNKNOWN.value: cls.FADE_UNKNOWN}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown visibility mode {text!r}") from None


class PolicyContractError(RuntimeError):
    """A policy returned a decision the engine cannot apply."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class ReplayMismatch(RuntimeError):
    pass


CONTINUE = "continue"
IDLE = "idle"
START = "start"
ABORT_AND_START = "abort_and_start"
_KINDS = (CONTINUE, IDLE, START, ABORT_AND_START)


@dataclass(frozen=True)
class Decision:
    kind: str
    packet_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown decision kind {self.kind!r}")
        if (self.kind in (START, ABORT_AND_START)) != (self.packet_id is not None):
            raise ValueError(f"{self.kind} decision with packet_id={self.packet_id!r}")

    def __str__(self):
        return self.kind if self.packet_id is None else f"{self.kind}({self.packet_id})"


def start(packet_id: str) -> Decision:
    return Decision(START, packet_id)


def abort_and_start(packet_id: str) -> Decision:
    return Decision(ABORT_AND_START, packet_id)


def send(packet_id: str, running: bool) -> Decision:
    """``start`` or ``abort_and_start`` depending on whether something is running."""
    return Decision(ABORT_AND_START if running else START, packet_id)


CONTINUE_DECISION = Decision(CONTINUE)
IDLE_DECISION = Decision(IDLE)


@dataclass(frozen=True)
class Running:
    packet: Packet
    start: int


@dataclass(frozen=True)
class PolicyView:
    """What a policy may look at when deciding at step ``now``.

    ``trace`` is None unless fade states are known; with the commit oracle the
    only channel information is ``quality`` (this step) and ``feasible``.
    """

    now: int
    pending: tuple[Packet, ...]
    running: Optional[Running]
    arrivals: frozenset
    quality: float
    feasible: Callable[[Packet], bool] = field(repr=False, compare=False)
    trace: Optional[FadeTrace] = field(default=None, repr=False)

    def feasible_pending(self) -> list[Packet]:
        return [p for p in self.pending if self.feasible(p)]


Policy = Callable[[PolicyView], Decision]


@dataclass(frozen=True)
class LogRecord:
    step: int
    pending: tuple[str, ...]
    running: Optional[str]
    quality: float
    decision: Decision
    expired: tuple[str, ...] = ()
    events: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "pending": list(self.pending),
            "running": self.running,
            "quality": self.quality,
            "decision": self.decision.kind,
            "packet_id": self.decision.packet_id,
            "expired": list(self.expired),
            "events": list(self.events),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogRecord":
        return cls(int(d["step"]), tuple(d["pending"]), d.get("running"), float(d["quality"]),
                   Decision(d["decision"], d.get("packet_id")),
                   tuple(d.get("expired", ())), tuple(d.get("events", ())))


@dataclass(frozen=True)
class DecisionLog:
    records: tuple[LogRecord, ...] = ()

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "DecisionLog":
        return cls(tuple(LogRecord.from_dict(json.loads(line))
                         for line in text.splitlines() if line.strip()))


def run(inst: Instance, policy: Policy, mode: VisibilityMode = VisibilityMode.FADE_UNKNOWN,
        *, validate: bool = True) -> tuple[ScheduleOutcome, DecisionLog]:
    """Simulate ``policy`` on ``inst`` over steps 1..horizon."""
    mode = VisibilityMode(mode)
    trace = inst.trace
    finish = completion_table(trace)
    by_release: dict[int, list[Packet]] = {}
    for p in inst.packets:
        by_release.setdefault(p.release, []).append(p)

    pending: dict[str, Packet] = {}
    running: Optional[Running] = None
    progress = 0.0
    transmissions: list[Transmission] = []
    records: list[LogRecord] = []

    for now in range(1, inst.horizon + 1):
        def feasible(p: Packet, _now=now) -> bool:
            c = finish[_now]
            return p.release <= _now and c is not None and c <= p.deadline

        arrivals = by_release.get(now, [])
        for p in arrivals:
            pending[p.id] = p
        expired = tuple(sorted(i for i, p in pending.items() if not feasible(p)))
        for i in expired:
            del pending[i]

        view = PolicyView(
            now=now,
            pending=tuple(pending[i] for i in sorted(pending)),
            running=running,
            arrivals=frozenset(p.id for p in arrivals),
            quality=trace.quality(now),
            feasible=feasible,
            trace=trace if mode is VisibilityMode.FADE_KNOWN else None,
        )
        decision = policy(view)
        if not isinstance(decision, Decision):
            raise PolicyContractError(now, f"policy returned {decision!r}, not a Decision")
        events: list[str] = []

        if decision.kind == CONTINUE:
            if running is None:
                raise PolicyContractError(now, "continue with nothing running")
        elif decision.kind == IDLE:
            if running is not None:
                raise PolicyContractError(now, f"idle while {running.packet.id} is running")
        else:
            target = pending.get(decision.packet_id)
            if target is None:
                raise PolicyContractError(now, f"{decision} names a packet that is not pending")
            if not feasible(target):
                raise PolicyContractError(now, f"{decision} names an infeasible packet")
            if decision.kind == START and running is not None:
                raise PolicyContractError(now, f"start while {running.packet.id} is running")
            if decision.kind == ABORT_AND_START:
                if running is None:
                    raise PolicyContractError(now, "abort_and_start with nothing running")
                victim = running.packet
                transmissions.append(Transmission(victim.id, running.start, now - 1, ABORTED, now))
                pending[victim.id] = victim
                events.append(f"aborted:{victim.id}")
            del pending[target.id]
            running = Running(target, now)
            progress = 0.0
            events.append(f"committed:{target.id}")

        if running is not None:
            progress += trace.quality(now)
            if progress >= 1.0 - QUALITY_EPS:
                transmissions.append(Transmission(running.packet.id, running.start, now, COMPLETED))
                events.append(f"completed:{running.packet.id}")
                running = None
                progress = 0.0

        records.append(LogRecord(
            step=now,
            pending=tuple(p.id for p in view.pending),
            running=view.running.packet.id if view.running else None,
            quality=view.quality,
            decision=decision,
            expired=expired,
            events=tuple(events),
        ))

    if running is not None:
        # cannot happen for oracle-checked commits; kept as a guard
        raise PolicyContractError(inst.horizon, f"{running.packet.id} still running at horizon")

    outcome = ScheduleOutcome.from_transmissions(inst, transmissions)
    if validate:
        problems = validate_outcome(inst, outcome)
        if problems:
            raise AssertionError(f"engine produced an invalid outcome: {problems}")
    return outcome, DecisionLog(tuple(records))


class ScriptedPolicy:
    """Replays a fixed decision per step; used by ``replay``."""

    def __init__(self, decisions: dict[int, Decision]):
        self.decisions = decisions

    def __call__(self, view: PolicyView) -> Decision:
        try:
            return self.decisions[view.now]
        except KeyError:
            raise PolicyContractError(view.now, "no logged decision for this step") from None


def replay(inst: Instance, log: DecisionLog) -> ScheduleOutcome:
    """Re-derive the outcome from a log and check every logged event is reproduced."""
    decisions = {}
    for r in log:
        if r.step in decisions:
            raise ReplayMismatch(f"two records for step {r.step}")
        decisions[r.step] = r.decision
    if set(decisions) != set(range(1, inst.horizon + 1)):
        raise ReplayMismatch(f"log covers steps {sorted(decisions)[:3]}..., instance has 1..{inst.horizon}")
    # the log may come from either mode; decisions do not depend on it here
    try:
        outcome, fresh = run(inst, ScriptedPolicy(decisions), VisibilityMode.FADE_KNOWN)
    except PolicyContractError as exc:
        raise ReplayMismatch(f"logged decision cannot be applied: {exc}") from exc
    for old, new in zip(log.records, fresh.records):
        if (old.events, old.expired, old.pending, old.running) != (new.events, new.expired, new.pending, new.running):
            raise ReplayMismatch(f"step {old.step}: log says {old.events}/{old.expired}, "
                                 f"replay gives {new.events}/{new.expired}")
    return outcome


def started_transmissions(log: Iterable[LogRecord]) -> list[tuple[int, str, Optional[str]]]:
    """``(step, started_id, aborted_id_or_None)`` for every commit in the log."""
    out = []
    for r in log:
        if r.decision.kind == START:
            out.append((r.step, r.decision.packet_id, None))
        elif r.decision.kind == ABORT_AND_START:
            out.append((r.step, r.decision.packet_id, r.running))
    return out
