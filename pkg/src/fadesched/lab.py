"""Instance construction and chain analysis.

Lower-bound instances, seeded random suites, the bounded-delay reduction and
the abort-chain machinery used to audit SEMI-GREEDY runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import DecisionLog, started_transmissions
from .model import FadeTrace, Instance, ModelError, Packet, make_instance
from .oracle import BoundedDelayInstance, bounded_delay_optimal
from .policies import PHI


# --- chains -----------------------------------------------------------------

def chain_bound(k: int, alpha: float) -> float:
    """Largest possible ``W(C) / w_last`` for a chain of ``k`` packets.

    Each packet is worth at most ``1/alpha`` of its successor, so the ratio is
    the geometric sum ``1 + 1/alpha + ... + 1/alpha**(k-1)``, reached by the
    chain whose weights grow by exactly ``alpha``.  Tends to
    ``alpha / (alpha - 1)`` as ``k`` grows (``phi**2`` for ``alpha = phi``).
    """
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if k < 1:
        raise ValueError(f"chain length must be >= 1, got {k}")
    return (alpha ** k - 1) / ((alpha - 1) * alpha ** (k - 1))


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class Chain:
    packets: tuple[Packet, ...]
    alpha: float

    def __post_init__(self):
        if not self.packets:
            raise ChainError("a chain needs at least one packet")
        for a, b in zip(self.packets, self.packets[1:]):
            # relative slack for weights that were multiplied by alpha
            if a.weight > b.weight / self.alpha * (1 + 1e-12):
                raise ChainError(f"{a.id} (w={a.weight}) -> {b.id} (w={b.weight}) breaks "
                                 f"the factor-{self.alpha} growth")

    @property
    def total(self) -> float:
        return math.fsum(p.weight for p in self.packets)

    @property
    def last(self) -> Packet:
        return self.packets[-1]

    @property
    def ratio(self) -> float:
        return self.total / self.last.weight

    def __len__(self):
        return len(self.packets)


def extract_chains(log: DecisionLog, alpha: float, inst: Instance) -> list[Chain]:
    """Split the started packets of a SEMI-GREEDY log into abort chains.

    A chain is a maximal run of transmissions each aborted by the next.  A
    packet restarted after an abort is assigned to the chain of its final
    transmission, which keeps the chains a partition of the started packets
    (dropping an inner link still leaves a valid chain).
    """
    by_id = inst.by_id
    runs: list[list[str]] = []
    for _, started, aborted in started_transmissions(log):
        if aborted is None:
            runs.append([started])
        else:
            if not runs or runs[-1][-1] != aborted:
                raise ChainError(f"{started} aborts {aborted}, which is not the running packet")
            runs[-1].append(started)
    last_run = {}
    for i, r in enumerate(runs):
        for pid in r:
            last_run[pid] = i
    chains = []
    for i, r in enumerate(runs):
        members = []
        for j, pid in enumerate(r):
            if last_run[pid] == i and pid not in members:
                members.append(pid)
            elif j == len(r) - 1:
                raise ChainError(f"{pid} ends a chain but is transmitted again later")
        if members:
            chains.append(Chain(tuple(by_id[pid] for pid in members), alpha))
    return chains


# --- lower-bound instances --------------------------------------------------

@dataclass(frozen=True)
class Annotated:
    instance: Instance
    expected: dict = field(default_factory=dict)


def gen_ratio2_family() -> tuple[Annotated, Annotated]:
    """Unit-weight instances at constant quality 0.5 that force ratio 2 on EDF-like play.

    Branch A follows an online algorithm that keeps the first packet; branch B
    follows one that switches to the second.
    """
    q = [0.5] * 6
    a = make_instance([("p1", 1, 1, 5), ("p2", 2, 1, 3)], q, name="ratio2-A")
    b = make_instance([("p1", 1, 1, 5), ("p2", 2, 1, 3), ("p3", 2, 1, 4)], q, name="ratio2-B")
    return (
        Annotated(a, {"opt": 2.0, "opt_plan": [["p2", 2, 3], ["p1", 4, 5]],
                      "online": {"nonabort-commit": 1.0}, "ratio": 2.0, "source": "construction"}),
        Annotated(b, {"opt": 2.0, "opt_plan": [["p1", 1, 2], ["p3", 3, 4]], "source": "construction"}),
    )


def gen_phi_instance() -> tuple[Annotated, Annotated]:
    """Two packets released together; the trace decides which one was the right pick.

    Branch 1 has quality 0.5 on steps 1..4, branch 2 on steps 1..5; zero after.
    Branch 2 was built to have optimum 1 + phi, which holds only if a packet
    need merely start by its deadline; ``opt`` is the oracle's value under
    complete-by-deadline and ``intended_opt`` keeps the intended one.
    """
    packets = [("p1", 1, 1.0, 2), ("p2", 1, PHI, 3)]
    b1 = make_instance(packets, [0.5] * 4 + [0.0] * 2, name="phi-branch1")
    b2 = make_instance(packets, [0.5] * 5 + [0.0], name="phi-branch2")
    return (
        Annotated(b1, {"opt": PHI, "opt_delivered": ["p2"], "online": {"priority:order=p1": 1.0},
                       "ratio": PHI, "source": "construction"}),
        Annotated(b2, {"intended_opt": 1 + PHI, "opt": PHI, "source": "oracle",
                       "note": "1 + phi assumes start-by-deadline; complete-by-deadline gives phi"}),
    )


# --- bounded-delay reduction -----------------------------------------------

def reduce_bounded_delay(bd: BoundedDelayInstance) -> Instance:
    """Fading-channel instance whose offline optimum equals the bounded-delay optimum.

    The optimal bounded-delay schedule fills slots 1..m (zero-weight dummies
    in empty slots).  Deadlines of scheduled packets are lowered to be strictly
    increasing along the schedule, and the trace is shaped so that exactly one
    unit of quality arrives between consecutive rewritten deadlines.
    """
    _, assignment = bounded_delay_optimal(bd)
    by_id = {p.id: p for p in bd.packets}
    m = max(assignment, default=0)
    if m == 0:
        return Instance(tuple(Packet(p.id, p.release, p.weight, p.deadline) for p in bd.packets),
                        FadeTrace([0.0] * bd.horizon), name="reduced")

    order: list[tuple[str, int, float, int]] = []  # (id, release, weight, original deadline)
    taken = set()
    used_ids = {p.id for p in bd.packets}
    for slot in range(1, m + 1):
        pid = assignment.get(slot)
        if pid is None:
            dummy = f"dummy{slot}"
            while dummy in used_ids:
                dummy += "_"
            used_ids.add(dummy)
            order.append((dummy, slot, 0.0, slot))
        else:
            p = by_id[pid]
            order.append((p.id, p.release, p.weight, p.deadline))
            taken.add(pid)

    rewritten = [0] * m
    rewritten[-1] = order[-1][3]
    for i in range(m - 2, -1, -1):
        rewritten[i] = min(order[i][3], rewritten[i + 1] - 1)
    for i, (pid, r, _, _) in enumerate(order):
        if rewritten[i] < i + 1 or r > i + 1:
            raise ModelError(f"bounded-delay schedule puts {pid} outside its window")

    horizon = max([rewritten[-1]] + [p.deadline for p in bd.packets])
    qualities = [0.0] * horizon
    prev = 0
    for d in rewritten:
        span = d - prev
        for t in range(prev + 1, d + 1):
            qualities[t - 1] = 1.0 / span
        prev = d

    packets = [Packet(pid, r, w, rewritten[i], dummy=w == 0)
               for i, (pid, r, w, _) in enumerate(order)]
    packets += [Packet(p.id, p.release, p.weight, p.deadline)
                for p in bd.packets if p.id not in taken]
    return Instance(tuple(packets), FadeTrace(qualities), name="reduced")


# --- random suites ----------------------------------------------------------

FADE_PROCESSES = ("constant", "iid", "markov")


@dataclass(frozen=True)
class RandomSuiteParams:
    """Knobs for ``gen_random``.

    Fade processes: ``constant`` (every step ``q``), ``iid`` (each step drawn
    from ``levels`` with ``probs``), ``markov`` (two-state good/bad chain with
    qualities ``q_good``/``q_bad`` and switch probabilities ``p_gb``/``p_bg``).
    Weights are ``uniform`` on ``weight_range``, ``pareto`` (heavy tail,
    shape ``pareto_shape``, scaled from ``weight_range[0]``) or ``choice`` from
    ``weight_levels``.
    """

    count: int = 100
    packets: int = 8
    release_span: int = 8
    slack_max: int = 4
    fade: str = "iid"
    q: float = 0.5
    levels: tuple[float, ...] = (0.25, 0.5, 1.0)
    probs: Optional[tuple[float, ...]] = None
    q_good: float = 1.0
    q_bad: float = 0.25
    p_gb: float = 0.3
    p_bg: float = 0.3
    weights: str = "uniform"
    weight_range: tuple[float, float] = (1.0, 10.0)
    pareto_shape: float = 1.5
    weight_levels: tuple[float, ...] = (1.0, PHI, PHI ** 2)
    seed: int = 0
    prefix: str = "rand"

    def validate(self) -> None:
        if self.count < 0 or self.packets < 0:
            raise ValueError("count and packets must be non-negative")
        if self.release_span < 1 or self.slack_max < 0:
            raise ValueError("release_span must be >= 1 and slack_max >= 0")
        if self.fade not in FADE_PROCESSES:
            raise ValueError(f"fade must be one of {FADE_PROCESSES}, got {self.fade!r}")
        qs = [self.q, self.q_good, self.q_bad, *self.levels]
        if any(not 0 <= x <= 1 for x in qs):
            raise ValueError("qualities must lie in [0, 1]")
        if any(not 0 <= x <= 1 for x in (self.p_gb, self.p_bg)):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if self.probs is not None:
            if len(self.probs) != len(self.levels) or any(p < 0 for p in self.probs) \
                    or not math.isclose(sum(self.probs), 1.0):
                raise ValueError("probs must be a distribution over levels")
        if self.mean_quality() <= 0:
            raise ValueError("fade process never transmits anything")
        lo, hi = self.weight_range
        if not 0 < lo <= hi:
            raise ValueError("weight_range must satisfy 0 < lo <= hi")
        if self.weights not in ("uniform", "pareto", "choice"):
            raise ValueError(f"unknown weight distribution {self.weights!r}")
        if self.weights == "choice" and (not self.weight_levels or min(self.weight_levels) <= 0):
            raise ValueError("weight_levels must be positive")

    def mean_quality(self) -> float:
        if self.fade == "constant":
            return self.q
        if self.fade == "iid":
            probs = self.probs or [1 / len(self.levels)] * len(self.levels)
            return float(np.dot(self.levels, probs))
        total = self.p_gb + self.p_bg
        if total == 0:
            return self.q_good
        return (self.p_bg * self.q_good + self.p_gb * self.q_bad) / total

    @property
    def expected_steps(self) -> int:
        return math.ceil(1 / self.mean_quality() - 1e-9)

    @property
    def horizon(self) -> int:
        return self.release_span + self.expected_steps - 1 + self.slack_max


def _fade_trace(params: RandomSuiteParams, rng: np.random.Generator, horizon: int) -> list[float]:
    if params.fade == "constant":
        return [params.q] * horizon
    if params.fade == "iid":
        idx = rng.choice(len(params.levels), size=horizon, p=params.probs)
        return [float(params.levels[i]) for i in idx]
    good = rng.random() < params.p_bg / max(params.p_gb + params.p_bg, 1e-12)
    out = []
    for _ in range(horizon):
        out.append(params.q_good if good else params.q_bad)
        flip = params.p_gb if good else params.p_bg
        if rng.random() < flip:
            good = not good
    return out


def _weight(params: RandomSuiteParams, rng: np.random.Generator) -> float:
    lo, hi = params.weight_range
    if params.weights == "uniform":
        return float(rng.uniform(lo, hi))
    if params.weights == "pareto":
        return float(lo * (1 + rng.pareto(params.pareto_shape)))
    return float(params.weight_levels[rng.integers(len(params.weight_levels))])


def gen_random(params: RandomSuiteParams) -> list[Instance]:
    """Seeded random instances; the same params always give the same instances.

    Deadlines are ``release + expected_steps - 1 + slack`` where
    ``expected_steps = ceil(1 / mean quality)``, so under a steady channel a
    packet is feasible on arrival.  Overload is expected.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    horizon = params.horizon
    width = len(str(max(params.count - 1, 0)))
    instances = []
    for n in range(params.count):
        qualities = _fade_trace(params, rng, horizon)
        packets = []
        for k in range(params.packets):
            r = int(rng.integers(1, params.release_span + 1))
            slack = int(rng.integers(0, params.slack_max + 1))
            d = min(r + params.expected_steps - 1 + slack, horizon)
            packets.append(Packet(f"p{k + 1}", r, _weight(params, rng), d))
        instances.append(Instance(tuple(packets), FadeTrace(qualities),
                                  name=f"{params.prefix}-{params.seed}-{n:0{width}d}"))
    return instances
