"""Discrete-time fading-channel model: packets, fade traces, instances, outcomes.

Packet length is normalised to 1 and channel quality per step lies in [0, 1].
A transmission started at step ``s`` occupies consecutive steps and completes at
the first step ``c`` where the inclusive quality sum over ``s..c`` reaches 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

# Absorbs float drift in cumulative sums (ten steps of 0.1 sum to 0.9999999999999999).
QUALITY_EPS = 1e-9


class ModelError(ValueError):
    """Raised for inputs that break a model invariant."""


@dataclass(frozen=True)
class Packet:
    id: str
    release: int
    weight: float
    deadline: int
    # zero-weight placeholder (only the bounded-delay reduction creates these)
    dummy: bool = False

    def __post_init__(self):
        if not (self.weight > 0 or self.dummy and self.weight == 0):
            raise ModelError(f"packet {self.id}: weight must be positive, got {self.weight}")
        if self.release < 1:
            raise ModelError(f"packet {self.id}: release must be >= 1, got {self.release}")
        if self.deadline < self.release:
            raise ModelError(f"packet {self.id}: deadline {self.deadline} before release {self.release}")


@dataclass(frozen=True)
class FadeTrace:
    qualities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "qualities", tuple(float(q) for q in self.qualities))
        if not self.qualities:
            raise ModelError("fade trace must cover at least one step")
        for t, q in enumerate(self.qualities, start=1):
            if not 0.0 <= q <= 1.0:
                raise ModelError(f"quality at step {t} outside [0, 1]: {q}")

    @property
    def horizon(self) -> int:
        return len(self.qualities)

    def quality(self, t: int) -> float:
        """Quality of (1-based) step ``t``."""
        return self.qualities[t - 1]

    def cumulative(self, start: int, end: int) -> float:
        """Inclusive quality sum over steps ``start..end`` (0 for an empty range)."""
        if end < start:
            return 0.0
        return math.fsum(self.qualities[start - 1:end])


@dataclass(frozen=True)
class Instance:
    packets: tuple[Packet, ...]
    trace: FadeTrace
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        seen = set()
        for p in self.packets:
            if p.id in seen:
                raise ModelError(f"duplicate packet id {p.id!r}")
            seen.add(p.id)
            if p.deadline > self.trace.horizon:
                raise ModelError(
                    f"packet {p.id}: deadline {p.deadline} beyond horizon {self.trace.horizon}")

    @property
    def horizon(self) -> int:
        return self.trace.horizon

    def packet(self, packet_id: str) -> Packet:
        for p in self.packets:
            if p.id == packet_id:
                return p
        raise KeyError(packet_id)

    @property
    def by_id(self) -> dict[str, Packet]:
        return {p.id: p for p in self.packets}


COMPLETED = "completed"
ABORTED = "aborted"


@dataclass(frozen=True)
class Transmission:
    """One attempt at sending a packet over steps ``start..end`` (inclusive).

    An aborted transmission carries ``aborted_at``, the step at which the abort
    took effect (normally ``end + 1``).
    """

    packet_id: str
    start: int
    end: int
    status: str = COMPLETED
    aborted_at: Optional[int] = None

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def steps(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class ScheduleOutcome:
    transmissions: tuple[Transmission, ...] = ()
    delivered: frozenset = field(default_factory=frozenset)
    throughput: float = 0.0

    @classmethod
    def from_transmissions(cls, inst: Instance, transmissions: Iterable[Transmission]) -> "ScheduleOutcome":
        transmissions = tuple(sorted(transmissions, key=lambda tr: (tr.start, tr.packet_id)))
        delivered = frozenset(tr.packet_id for tr in transmissions if tr.completed)
        by_id = inst.by_id
        return cls(transmissions, delivered, math.fsum(by_id[i].weight for i in sorted(delivered)))


def completion_step(start: int, trace: FadeTrace) -> Optional[int]:
    """First step ``c >= start`` whose inclusive quality sum from ``start`` reaches 1.

    Returns None when the trace ends before that happens.
    """
    if not 1 <= start <= trace.horizon:
        raise ModelError(f"start step {start} outside 1..{trace.horizon}")
    acc = 0.0
    for t in range(start, trace.horizon + 1):
        acc += trace.qualities[t - 1]
        if acc >= 1.0 - QUALITY_EPS:
            return t
    return None


def completion_table(trace: FadeTrace) -> list[Optional[int]]:
    """``table[s]`` = completion_step(s, trace) for s in 1..horizon; index 0 unused."""
    return [None] + [completion_step(s, trace) for s in range(1, trace.horizon + 1)]


def commit_feasible(p: Packet, start: int, trace: FadeTrace) -> bool:
    """Whether ``p`` started at ``start`` would finish by the end of step ``p.deadline``."""
    if start < p.release:
        raise ModelError(f"packet {p.id} cannot start at {start}, released at {p.release}")
    if start > trace.horizon:
        return False
    c = completion_step(start, trace)
    return c is not None and c <= p.deadline


def weighted_throughput(out: ScheduleOutcome, inst: Optional[Instance] = None) -> float:
    """Total weight of delivered packets.

    With an instance the sum is recomputed from packet weights; otherwise the
    outcome's own ``throughput`` field is trusted.
    """
    if inst is None:
        return out.throughput if out.delivered else 0.0
    by_id = inst.by_id
    return math.fsum(by_id[i].weight for i in sorted(out.delivered))


def validate_outcome(inst: Instance, out: ScheduleOutcome) -> list[str]:
    """List every model violation in ``out``; an empty list means the outcome is legal."""
    problems: list[str] = []
    by_id = inst.by_id
    trace = inst.trace
    occupied: dict[int, str] = {}
    completions: dict[str, int] = {}
    aborted_before: set[str] = set()

    for tr in sorted(out.transmissions, key=lambda tr: (tr.start, tr.end, tr.packet_id)):
        p = by_id.get(tr.packet_id)
        if p is None:
            problems.append(f"unknown packet {tr.packet_id!r}")
            continue
        if tr.start > tr.end:
            problems.append(f"{p.id}: start {tr.start} after end {tr.end}")
            continue
        if tr.start < 1 or tr.end > trace.horizon:
            problems.append(f"{p.id}: steps {tr.start}..{tr.end} outside horizon 1..{trace.horizon}")
            continue
        if tr.start < p.release:
            problems.append(f"{p.id}: starts at {tr.start} before release {p.release}")
        for t in tr.steps:
            if t in occupied:
                problems.append(f"overlap at step {t} ({occupied[t]} and {p.id})")
            else:
                occupied[t] = p.id

        sent = trace.cumulative(tr.start, tr.end)
        if tr.completed:
            if tr.end > p.deadline:
                problems.append(f"{p.id}: completes at {tr.end} after deadline {p.deadline}")
            if sent < 1.0 - QUALITY_EPS:
                if p.id in aborted_before:
                    problems.append(f"{p.id}: reused progress after abort "
                                    f"(steps {tr.start}..{tr.end} carry only {sent:.6g})")
                else:
                    problems.append(f"{p.id}: insufficient quality {sent:.6g} over {tr.start}..{tr.end}")
            elif trace.cumulative(tr.start, tr.end - 1) >= 1.0 - QUALITY_EPS:
                problems.append(f"{p.id}: not minimal, already complete before step {tr.end}")
            if p.id in completions:
                problems.append(f"{p.id}: delivered twice (steps {completions[p.id]} and {tr.end})")
            completions[p.id] = tr.end
        elif tr.status == ABORTED:
            if sent >= 1.0 - QUALITY_EPS:
                problems.append(f"{p.id}: aborted at {tr.aborted_at} although complete by {tr.end}")
            if tr.aborted_at is not None and tr.aborted_at != tr.end + 1:
                problems.append(f"{p.id}: aborted_at {tr.aborted_at} does not follow end {tr.end}")
            aborted_before.add(p.id)
        else:
            problems.append(f"{p.id}: unknown status {tr.status!r}")

    if set(out.delivered) != set(completions):
        problems.append(f"delivered set {sorted(out.delivered)} differs from completed "
                        f"transmissions {sorted(completions)}")
    expected = math.fsum(by_id[i].weight for i in sorted(completions) if i in by_id)
    if not math.isclose(out.throughput, expected, rel_tol=1e-12, abs_tol=1e-12):
        problems.append(f"throughput {out.throughput!r} != delivered weight {expected!r}")
    return problems


# --- JSON interchange -------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    d = {
        "horizon": inst.horizon,
        "qualities": list(inst.trace.qualities),
        "packets": [
            {"id": p.id, "release": p.release, "weight": p.weight, "deadline": p.deadline,
             **({"dummy": True} if p.dummy else {})}
            for p in inst.packets
        ],
    }
    if inst.name:
        d["name"] = inst.name
    return d


def instance_from_dict(d: dict, name: str = "") -> Instance:
    try:
        qualities = d["qualities"]
        horizon = int(d.get("horizon", len(qualities)))
        packets = [
            Packet(str(p["id"]), int(p["release"]), float(p["weight"]), int(p["deadline"]),
                   bool(p.get("dummy", False)))
            for p in d["packets"]
        ]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed instance: {exc}") from exc
    if horizon != len(qualities):
        raise ModelError(f"horizon {horizon} != number of qualities {len(qualities)}")
    return Instance(tuple(packets), FadeTrace(qualities), name=d.get("name", name))


def dump_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    path = Path(path)
    return instance_from_dict(json.loads(path.read_text(encoding="utf-8")), name=path.stem)


def outcome_to_dict(out: ScheduleOutcome) -> dict:
    return {
        "transmissions": [
            {"packet_id": tr.packet_id, "start": tr.start, "end": tr.end, "status": tr.status,
             **({"aborted_at": tr.aborted_at} if tr.aborted_at is not None else {})}
            for tr in out.transmissions
        ],
        "delivered": sorted(out.delivered),
        "throughput": out.throughput,
    }


def outcome_from_dict(d: dict) -> ScheduleOutcome:
    trs = tuple(
        Transmission(str(t["packet_id"]), int(t["start"]), int(t["end"]),
                     t.get("status", COMPLETED), t.get("aborted_at"))
        for t in d.get("transmissions", [])
    )
    return ScheduleOutcome(trs, frozenset(str(i) for i in d.get("delivered", [])),
                           float(d.get("throughput", 0.0)))


def make_instance(packets: Sequence[tuple], qualities: Sequence[float], name: str = "") -> Instance:
    """Shorthand: ``packets`` as ``(id, release, weight, deadline)`` tuples."""
    return Instance(tuple(Packet(str(i), r, float(w), d) for i, r, w, d in packets),
                    FadeTrace(qualities), name=name)
