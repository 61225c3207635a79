"""Independent reference oracles and instance strategies shared by the tests.

Nothing here calls the package's solvers; the brute-force routines recompute
transmission times from raw quality sums.
"""
import itertools
import math
from functools import lru_cache

import pytest
from hypothesis import strategies as st

from fadesched.model import make_instance

PHI = (1 + 5 ** 0.5) / 2
EPS = 1e-9


def finish_from(start, qualities):
    """First step whose inclusive sum from ``start`` reaches 1, by plain accumulation."""
    total = 0.0
    for t in range(start, len(qualities) + 1):
        total += qualities[t - 1]
        if total >= 1 - EPS:
            return t
    return None


def brute_opt(inst):
    """Best value over every subset and every order, each packet started as early as possible.

    For a fixed order, starting earlier never finishes later, so left-shifted
    starts are optimal; enumerating all orders covers inserted idle time.
    """
    q = inst.trace.qualities
    best = 0.0
    for r in range(1, len(inst.packets) + 1):
        for subset in itertools.combinations(inst.packets, r):
            value = math.fsum(p.weight for p in subset)
            if value <= best:
                continue
            for order in itertools.permutations(subset):
                t, ok = 1, True
                for p in order:
                    s = max(t, p.release)
                    c = finish_from(s, q) if s <= len(q) else None
                    if c is None or c > p.deadline:
                        ok = False
                        break
                    t = c + 1
                if ok:
                    best = value
                    break
    return best


def abort_search_opt(inst):
    """Exhaustive search over every per-step decision, aborts included."""
    packets = sorted(inst.packets, key=lambda p: p.id)
    q = inst.trace.qualities
    horizon = len(q)

    @lru_cache(maxsize=None)
    def go(t, running, start, delivered):
        if t > horizon:
            return 0.0
        options = []
        released = [k for k, p in enumerate(packets)
                    if p.release <= t and not delivered >> k & 1 and k != running]
        if running is None:
            options.append((None, None))
        else:
            options.append((running, start))
        for k in released:
            options.append((k, t))
        best = 0.0
        for run_k, s in options:
            gain, nxt_run, nxt_start, nxt_del = 0.0, run_k, s, delivered
            if run_k is not None:
                sent = math.fsum(q[s - 1:t])
                if sent >= 1 - EPS:
                    if t <= packets[run_k].deadline:
                        gain = packets[run_k].weight
                        nxt_del = delivered | 1 << run_k
                    nxt_run, nxt_start = None, None
            best = max(best, gain + go(t + 1, nxt_run, nxt_start, nxt_del))
        return best

    return go(1, None, None, 0)


def bd_brute(bd):
    """Bounded-delay optimum by trying every slot assignment."""
    packets = list(bd.packets)
    best = 0.0
    choices = [[None] + list(range(p.release, p.deadline + 1)) for p in packets]
    for assign in itertools.product(*choices):
        used = [s for s in assign if s is not None]
        if len(used) != len(set(used)):
            continue
        best = max(best, math.fsum(p.weight for p, s in zip(packets, assign) if s is not None))
    return best


def _unit_edf_feasible(packets):
    """Unit jobs with integer releases: slot-by-slot EDF meets every deadline iff any order does."""
    waiting = sorted(packets, key=lambda p: p.release)
    ready = []
    slot = 0
    i = 0
    while i < len(waiting) or ready:
        slot = max(slot + 1, waiting[i].release if not ready and i < len(waiting) else slot + 1)
        while i < len(waiting) and waiting[i].release <= slot:
            ready.append(waiting[i])
            i += 1
        ready.sort(key=lambda p: p.deadline)
        if ready.pop(0).deadline < slot:
            return False
    return True


def bd_greedy(bd):
    """Heaviest first, admitting a packet when the chosen set stays slot-feasible."""
    chosen = []
    for p in sorted(bd.packets, key=lambda p: (-p.weight, p.deadline, p.id)):
        if _unit_edf_feasible(chosen + [p]):
            chosen.append(p)
    return math.fsum(p.weight for p in chosen)


QUALITY_LEVELS = (0.0, 0.25, 0.3, 0.5, 0.75, 1.0)


@st.composite
def small_instances(draw, max_packets=5, max_horizon=8, levels=QUALITY_LEVELS):
    horizon = draw(st.integers(2, max_horizon))
    qualities = draw(st.lists(st.sampled_from(levels), min_size=horizon, max_size=horizon))
    n = draw(st.integers(0, max_packets))
    packets = []
    for k in range(n):
        r = draw(st.integers(1, horizon))
        d = draw(st.integers(r, horizon))
        w = draw(st.sampled_from((1.0, 1.5, PHI, 2.0, 2.5, 3.0, 5.0)))
        packets.append((f"p{k}", r, w, d))
    return make_instance(packets, qualities)


@pytest.fixture
def const_half():
    def build(packets, horizon=6):
        return make_instance(packets, [0.5] * horizon)
    return build


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
