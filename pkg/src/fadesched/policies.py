"""Online scheduling policies.

``SemiGreedy`` and ``EdfBeta`` are the two competitive algorithms; the rest are
naive baselines and a scripted priority policy used to reproduce adversary
arguments.  Every policy is a frozen dataclass whose ``__call__`` is a pure
function of the ``PolicyView``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .engine import (
    CONTINUE_DECISION,
    IDLE_DECISION,
    Decision,
    PolicyView,
    VisibilityMode,
    send,
)
from .model import FadeTrace, Packet, completion_step

PHI = (1 + math.sqrt(5)) / 2


def _heaviest(packets: Iterable[Packet]) -> Optional[Packet]:
    # weight desc, then earlier deadline, then id
    return min(packets, key=lambda p: (-p.weight, p.deadline, p.id), default=None)


def _earliest(packets: Iterable[Packet]) -> Optional[Packet]:
    return min(packets, key=lambda p: (p.deadline, -p.weight, p.id), default=None)


def completion_ladder(t: int, trace: FadeTrace, m: int) -> list[int]:
    """Completion steps of up to ``m`` back-to-back transmissions starting at ``t``.

    Since all packets have the same length the ladder does not depend on which
    packets fill it.  Truncated where the trace can no longer finish a packet.
    """
    ladder = []
    s = t
    while len(ladder) < m and s <= trace.horizon:
        c = completion_step(s, trace)
        if c is None:
            break
        ladder.append(c)
        s = c + 1
    return ladder


@dataclass(frozen=True)
class Slot:
    packet: Packet
    start: int
    completion: int


@dataclass(frozen=True)
class ProvisionalSchedule:
    slots: tuple[Slot, ...] = ()

    @property
    def total_value(self) -> float:
        return math.fsum(s.packet.weight for s in self.slots)

    @property
    def packets(self) -> list[Packet]:
        return [s.packet for s in self.slots]

    def __len__(self):
        return len(self.slots)


def _edf_order(packets: Iterable[Packet]) -> list[Packet]:
    return sorted(packets, key=lambda p: (p.deadline, p.id))


def position_feasible(packets: Sequence[Packet], ladder: Sequence[int]) -> bool:
    """Deadline-sorted packets fit the ladder positions one-to-one."""
    if len(packets) > len(ladder):
        return False
    return all(p.deadline >= c for p, c in zip(_edf_order(packets), ladder))


def optimal_provisional(pending: Iterable[Packet], t: int, trace: FadeTrace) -> ProvisionalSchedule:
    """Maximum-value schedule of ``pending`` from step ``t`` on, assuming no further arrivals.

    Positions have fixed completion times, and a packet fits any prefix of them
    up to its deadline, so feasible sets form a matroid and greedy by weight is
    exact.
    """
    pending = list(pending)
    ladder = completion_ladder(t, trace, len(pending))
    chosen: list[Packet] = []
    for p in sorted(pending, key=lambda p: (-p.weight, p.deadline, p.id)):
        if position_feasible(chosen + [p], ladder):
            chosen.append(p)
    slots = []
    s = t
    for p, c in zip(_edf_order(chosen), ladder):
        slots.append(Slot(p, s, c))
        s = c + 1
    return ProvisionalSchedule(tuple(slots))


@dataclass(frozen=True)
class SemiGreedy:
    """Send the heaviest feasible packet ``h`` whenever ``w_h >= alpha * w_running``."""

    alpha: float = PHI
    name: str = "semi-greedy"
    requires_trace = False

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")

    def __call__(self, view: PolicyView) -> Decision:
        h = _heaviest(view.feasible_pending())
        w_i = view.running.packet.weight if view.running else 0.0
        if h is not None and h.weight >= self.alpha * w_i:
            return send(h.id, view.running is not None)
        return CONTINUE_DECISION if view.running else IDLE_DECISION

    @property
    def label(self) -> str:
        return f"semi-greedy:alpha={self.alpha:.12g}"


@dataclass(frozen=True)
class EdfBeta:
    """Modified EDF over the optimal provisional schedule (needs the fade trace).

    While a packet runs, only a fresh arrival worth at least ``beta`` times the
    running packet may preempt it.  When idle, run the earliest-deadline member
    ``e`` of the provisional schedule unless it is worth less than ``w_h / beta``;
    then run the earliest-deadline member worth ``max(beta * w_e, w_h / beta)``.
    """

    beta: float = 2.0
    name: str = "edf"
    requires_trace = True

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError(f"beta must be > 1, got {self.beta}")

    def __call__(self, view: PolicyView) -> Decision:
        if view.trace is None:
            raise ValueError("EDF_beta needs the fade trace (fade_known mode)")
        if view.running is not None:
            w_i = view.running.packet.weight
            challengers = [p for p in view.feasible_pending()
                           if p.id in view.arrivals and p.weight >= self.beta * w_i]
            chosen = _earliest(challengers)
            if chosen is not None:
                return send(chosen.id, True)
            return CONTINUE_DECISION

        sched = optimal_provisional(view.feasible_pending(), view.now, view.trace)
        if not sched.slots:
            return IDLE_DECISION
        members = sched.packets
        e = members[0]
        h = _heaviest(members)
        if e.weight >= h.weight / self.beta:
            return send(e.id, False)
        threshold = max(self.beta * e.weight, h.weight / self.beta)
        # members are already in deadline order; h always qualifies
        f = next(p for p in members if p.weight >= threshold)
        return send(f.id, False)

    @property
    def label(self) -> str:
        return f"edf:beta={self.beta:.12g}"


@dataclass(frozen=True)
class GreedyMax:
    name: str = "greedy-max"
    requires_trace = False

    def __call__(self, view: PolicyView) -> Decision:
        h = _heaviest(view.feasible_pending())
        if view.running is None:
            return send(h.id, False) if h else IDLE_DECISION
        if h is not None and h.weight > view.running.packet.weight:
            return send(h.id, True)
        return CONTINUE_DECISION

    label = "greedy-max"


@dataclass(frozen=True)
class BaselineEdf:
    name: str = "edf-baseline"
    requires_trace = False

    def __call__(self, view: PolicyView) -> Decision:
        e = _earliest(view.feasible_pending())
        if view.running is None:
            return send(e.id, False) if e else IDLE_DECISION
        if e is not None and e.deadline < view.running.packet.deadline:
            return send(e.id, True)
        return CONTINUE_DECISION

    label = "edf-baseline"


@dataclass(frozen=True)
class NonAbortCommit:
    name: str = "nonabort-commit"
    requires_trace = False

    def __call__(self, view: PolicyView) -> Decision:
        if view.running is not None:
            return CONTINUE_DECISION
        cands = view.feasible_pending()
        if not cands:
            return IDLE_DECISION
        p = min(cands, key=lambda p: (p.release, p.deadline, p.id))
        return send(p.id, False)

    label = "nonabort-commit"


@dataclass(frozen=True)
class Priority:
    """Never aborts; when idle, starts the first feasible packet in ``order``.

    Packets missing from ``order`` are never sent.
    """

    order: tuple[str, ...]
    name: str = "priority"
    requires_trace = False

    def __call__(self, view: PolicyView) -> Decision:
        if view.running is not None:
            return CONTINUE_DECISION
        feasible = {p.id for p in view.feasible_pending()}
        for pid in self.order:
            if pid in feasible:
                return send(pid, False)
        return IDLE_DECISION

    @property
    def label(self) -> str:
        return "priority:order=" + "/".join(self.order)


_FACTORIES = {
    "semi-greedy": lambda kw: SemiGreedy(alpha=float(kw.pop("alpha", PHI))),
    "edf": lambda kw: EdfBeta(beta=float(kw.pop("beta", 2.0))),
    "greedy-max": lambda kw: GreedyMax(),
    "edf-baseline": lambda kw: BaselineEdf(),
    "nonabort-commit": lambda kw: NonAbortCommit(),
    "priority": lambda kw: Priority(order=tuple(x for x in kw.pop("order", "").split("/") if x)),
}

POLICY_NAMES = tuple(_FACTORIES)


def parse_policy(text: str):
    """Build a policy from ``name[:key=value[,key=value]]``.

    >>> parse_policy("semi-greedy:alpha=2").alpha
    2.0
    >>> parse_policy("priority:order=p1/p2").order
    ('p1', 'p2')
    """
    name, _, rest = text.strip().partition(":")
    if name not in _FACTORIES:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"policy parameter {item!r} is not key=value")
        kw[key.strip()] = value.strip()
    policy = _FACTORIES[name](kw)
    if kw:
        raise ValueError(f"unexpected parameters for {name}: {sorted(kw)}")
    return policy


def default_mode(policy) -> VisibilityMode:
    return VisibilityMode.FADE_KNOWN if policy.requires_trace else VisibilityMode.FADE_UNKNOWN


def check_mode(policy, mode: VisibilityMode) -> None:
    if policy.requires_trace and VisibilityMode(mode) is not VisibilityMode.FADE_KNOWN:
        raise ValueError(f"{policy.label} needs fade_known mode, got {VisibilityMode(mode).value}")
