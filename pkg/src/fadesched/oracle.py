"""Exact offline optima by exhaustive search (desk-scale, hard caps).

The fading-channel search only branches at moments when the channel is free:
commit a released packet and run it to completion, or idle until the next
release.  Nothing else is needed.  Aborting only wastes steps, and because
completion times never get later when a start moves earlier, any optimal
schedule can be left-shifted so every start is at a release or right after
the previous completion.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .engine import CONTINUE_DECISION, IDLE_DECISION, Decision, PolicyView, VisibilityMode, run, send
from .model import (
    Instance,
    ModelError,
    ScheduleOutcome,
    Transmission,
    completion_table,
    validate_outcome,
)

DEFAULT_CAP = 12
BOUNDED_DELAY_CAP = 16


class OracleCapExceeded(RuntimeError):
    pass


class PlanViolation(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def _prefer_set(a: int, b: int) -> int:
    """+1 if mask ``a`` is preferred, -1 if ``b`` is, 0 if equal.

    The preferred set is the one containing the smallest id where they differ
    (bit k is the k-th id in sorted order).  Unlike comparing sorted id tuples
    this order survives adding the same packet to both sets, which the
    memoised searches rely on.
    """
    x = a ^ b
    if not x:
        return 0
    return 1 if a & (x & -x) else -1


def _better(cand: tuple, best: tuple) -> bool:
    # (value, id mask, completion profile, ...)
    if cand[0] != best[0]:
        return cand[0] > best[0]
    pref = _prefer_set(cand[1], best[1])
    if pref:
        return pref > 0
    return cand[2] < best[2]


def offline_optimal(inst: Instance, cap: int = DEFAULT_CAP) -> ScheduleOutcome:
    """Maximum weighted throughput over all schedules of ``inst``.

    Ties go to the set containing the smallest differing packet id, then to
    the earlier completion profile.
    """
    n = len(inst.packets)
    if n > cap:
        raise OracleCapExceeded(f"{n} packets exceeds oracle cap {cap}")
    if n == 0:
        return ScheduleOutcome()
    packets = sorted(inst.packets, key=lambda p: p.id)
    weights = [p.weight for p in packets]
    finish = completion_table(inst.trace)
    releases = sorted({p.release for p in packets})
    horizon = inst.horizon
    empty = (0.0, 0, (), ())

    def live(t: int, unused: int) -> int:
        # drop packets that can no longer finish when started at t or later
        c = finish[t] if t <= horizon else None
        if c is None:
            return 0
        return sum(1 << k for k, p in enumerate(packets) if unused >> k & 1 and p.deadline >= c)

    def value_of(mask: int) -> float:
        return math.fsum(weights[k] for k in range(n) if mask >> k & 1)

    @lru_cache(maxsize=None)
    def best(t: int, unused: int) -> tuple:
        # (value, delivered mask, completion profile, plan)
        result = empty
        if not unused:
            return result
        c = finish[t]
        if c is not None:
            for k, p in enumerate(packets):
                if unused >> k & 1 and p.release <= t:
                    rest = unused & ~(1 << k)
                    sub = best(c + 1, live(c + 1, rest)) if c < horizon else empty
                    mask = sub[1] | 1 << k
                    cand = (value_of(mask), mask, (c,) + sub[2], ((p.id, t, c),) + sub[3])
                    if _better(cand, result):
                        result = cand
        i = bisect.bisect_right(releases, t)
        if i < len(releases):
            nt = releases[i]
            sub = best(nt, live(nt, unused))
            if _better(sub, result):
                result = sub
        return result

    first = releases[0]
    plan = best(first, live(first, (1 << n) - 1))[3]
    outcome = ScheduleOutcome.from_transmissions(
        inst, (Transmission(pid, s, c) for pid, s, c in plan))
    problems = validate_outcome(inst, outcome)
    if problems:
        raise AssertionError(f"oracle produced an invalid schedule: {problems}")
    return outcome


@dataclass(frozen=True)
class BDPacket:
    id: str
    release: int
    weight: float
    deadline: int


@dataclass(frozen=True)
class BoundedDelayInstance:
    """Unit-time packets, one per slot, each in ``release..deadline``."""

    packets: tuple[BDPacket, ...]
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        ids = [p.id for p in self.packets]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate packet ids")
        for p in self.packets:
            if not 1 <= p.release <= p.deadline <= self.horizon:
                raise ModelError(f"packet {p.id}: need 1 <= release <= deadline <= horizon")
            if not p.weight > 0:
                raise ModelError(f"packet {p.id}: weight must be positive")

    def to_dict(self) -> dict:
        return {"model": "bounded-delay", "horizon": self.horizon,
                "packets": [{"id": p.id, "release": p.release, "weight": p.weight,
                             "deadline": p.deadline} for p in self.packets]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundedDelayInstance":
        if d.get("model") != "bounded-delay":
            raise ModelError("not a bounded-delay instance (missing \"model\": \"bounded-delay\")")
        return cls(tuple(BDPacket(str(p["id"]), int(p["release"]), float(p["weight"]),
                                  int(p["deadline"])) for p in d["packets"]),
                   int(d["horizon"]))


def bounded_delay_optimal(bd: BoundedDelayInstance,
                          cap: int = BOUNDED_DELAY_CAP) -> tuple[float, dict[int, str]]:
    """Best total weight and its ``slot -> packet id`` assignment, by memoised search."""
    n = len(bd.packets)
    if n > cap:
        raise OracleCapExceeded(f"{n} packets exceeds bounded-delay cap {cap}")
    packets = sorted(bd.packets, key=lambda p: p.id)
    last = max((p.deadline for p in packets), default=0)

    @lru_cache(maxsize=None)
    def best(slot: int, unused: int) -> tuple:
        # (value, used mask, (), assignment)
        if slot > last or unused == 0:
            return (0.0, 0, (), ())
        result = best(slot + 1, unused)
        for k, p in enumerate(packets):
            if unused >> k & 1 and p.release <= slot <= p.deadline:
                sub = best(slot + 1, unused & ~(1 << k))
                mask = sub[1] | 1 << k
                value = math.fsum(packets[j].weight for j in range(n) if mask >> j & 1)
                cand = (value, mask, (), ((slot, p.id),) + sub[3])
                if _better(cand, result):
                    result = cand
        return result

    value, _, _, assignment = best(1, (1 << n) - 1)
    return value, dict(assignment)


class _PlanPolicy:
    def __init__(self, starts: dict[int, str]):
        self.starts = starts

    def __call__(self, view: PolicyView) -> Decision:
        pid = self.starts.get(view.now)
        if pid is not None:
            return send(pid, view.running is not None)
        if view.running is not None:
            return CONTINUE_DECISION
        return IDLE_DECISION


def adversary_replay(inst: Instance, plan: Sequence[tuple]) -> ScheduleOutcome:
    """Execute an explicit plan of ``(packet_id, start[, end])`` transmissions.

    The plan is first checked against the model as a claimed schedule, then run
    through the engine.  Raises ``PlanViolation`` listing every problem.
    """
    by_id = inst.by_id
    finish = completion_table(inst.trace)
    claimed = []
    for item in plan:
        pid, s = str(item[0]), int(item[1])
        if pid not in by_id:
            raise PlanViolation([f"unknown packet {pid!r}"])
        if len(item) > 2:
            end = int(item[2])
        else:
            end = finish[s] if 1 <= s <= inst.horizon and finish[s] is not None else inst.horizon
        claimed.append(Transmission(pid, s, end))
    problems = validate_outcome(inst, ScheduleOutcome.from_transmissions(inst, claimed))
    if problems:
        raise PlanViolation(problems)
    outcome, _ = run(inst, _PlanPolicy({tr.start: tr.packet_id for tr in claimed}),
                     VisibilityMode.FADE_KNOWN)
    if outcome.delivered != frozenset(tr.packet_id for tr in claimed):
        raise PlanViolation([f"engine delivered {sorted(outcome.delivered)}, plan claims "
                             f"{sorted(tr.packet_id for tr in claimed)}"])
    return outcome
