"""Online scheduling of weighted, deadline-constrained packets over a fading channel."""
from .engine import Decision, DecisionLog, PolicyView, VisibilityMode, replay, run
from .lab import (
    RandomSuiteParams,
    chain_bound,
    extract_chains,
    gen_phi_instance,
    gen_random,
    gen_ratio2_family,
    reduce_bounded_delay,
)
from .model import (
    FadeTrace,
    Instance,
    Packet,
    ScheduleOutcome,
    Transmission,
    commit_feasible,
    completion_step,
    validate_outcome,
    weighted_throughput,
)
from .oracle import BoundedDelayInstance, adversary_replay, bounded_delay_optimal, offline_optimal
from .policies import PHI, EdfBeta, SemiGreedy, completion_ladder, optimal_provisional, parse_policy

__version__ = "0.1.0"

__all__ = [
    "Decision", "DecisionLog", "PolicyView", "VisibilityMode", "replay", "run",
    "RandomSuiteParams", "chain_bound", "extract_chains", "gen_phi_instance", "gen_random",
    "gen_ratio2_family", "reduce_bounded_delay",
    "FadeTrace", "Instance", "Packet", "ScheduleOutcome", "Transmission", "commit_feasible",
    "completion_step", "validate_outcome", "weighted_throughput",
    "BoundedDelayInstance", "adversary_replay", "bounded_delay_optimal", "offline_optimal",
    "PHI", "EdfBeta", "SemiGreedy", "completion_ladder", "optimal_provisional", "parse_policy",
]
