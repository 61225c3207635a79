"""Competitive-ratio experiments: policies against the offline optimum.

Reports are plain rows (one per instance and policy) plus a per-policy
summary, written as CSV and JSON.  Output depends only on the config, never on
worker count or completion order.
"""
from __future__ import annotations

import csv
import glob
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .engine import VisibilityMode, run
from .lab import (
    RandomSuiteParams,
    chain_bound,
    extract_chains,
    gen_phi_instance,
    gen_random,
    gen_ratio2_family,
)
from .model import Instance, load_instance
from .oracle import DEFAULT_CAP, OracleCapExceeded, offline_optimal
from .policies import EdfBeta, SemiGreedy, check_mode, default_mode, parse_policy

log = logging.getLogger(__name__)

CSV_COLUMNS = ("instance_id", "policy", "mode", "online_value", "opt_value", "ratio",
               "max_chain_ratio", "skipped", "reason")
INF = float("inf")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    spec: str
    mode: VisibilityMode

    @property
    def policy(self):
        return parse_policy(self.spec)

    @property
    def label(self) -> str:
        return self.policy.label


@dataclass
class ExperimentConfig:
    sources: list[dict] = field(default_factory=list)
    policies: list[PolicySpec] = field(default_factory=list)
    oracle_cap: int = DEFAULT_CAP
    allow_skips: bool = True
    seed: int = 0
    workers: int = 1
    csv_path: Optional[str] = None
    json_path: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        try:
            policies = []
            for item in d.get("policies", []):
                if isinstance(item, str):
                    item = {"policy": item}
                pol = parse_policy(item["policy"])
                mode = VisibilityMode.parse(item["mode"]) if "mode" in item else default_mode(pol)
                check_mode(pol, mode)
                policies.append(PolicySpec(item["policy"], mode))
            sources = d.get("instances", [])
            if isinstance(sources, dict):
                sources = [sources]
            out = d.get("output", {})
            cfg = cls(
                sources=[dict(s) for s in sources],
                policies=policies,
                oracle_cap=int(d.get("oracle_cap", DEFAULT_CAP)),
                allow_skips=bool(d.get("allow_skips", True)),
                seed=int(d.get("seed", 0)),
                workers=int(d.get("workers", 1)),
                csv_path=_resolve(out.get("csv"), base_dir),
                json_path=_resolve(out.get("json"), base_dir),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.oracle_cap < 1 or cfg.workers < 1:
            raise ConfigError("oracle_cap and workers must be positive")
        for src in cfg.sources:
            if "files" in src:
                src["files"] = _resolve(src["files"], base_dir)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, path.parent)

    def to_dict(self) -> dict:
        return {
            "instances": self.sources,
            "policies": [{"policy": p.spec, "mode": p.mode.value} for p in self.policies],
            "oracle_cap": self.oracle_cap,
            "allow_skips": self.allow_skips,
            "seed": self.seed,
        }


def _resolve(p: Optional[str], base: Path) -> Optional[str]:
    if p is None:
        return None
    return str(Path(p)) if Path(p).is_absolute() else str(base / p)


def load_sources(sources: Sequence[dict], seed: int = 0) -> list[Instance]:
    """Materialise every instance source of a config, in order."""
    out: list[Instance] = []
    for src in sources:
        if "files" in src:
            paths = sorted(glob.glob(src["files"]))
            out.extend(load_instance(p) for p in paths
                       if not p.endswith(".expected.json"))
            continue
        kind = src.get("generator")
        if kind == "random":
            params = dict(src.get("params", {}))
            params.setdefault("seed", seed)
            out.extend(gen_random(random_params(params)))
        elif kind == "ratio2":
            out.extend(a.instance for a in gen_ratio2_family())
        elif kind == "phi":
            out.extend(a.instance for a in gen_phi_instance())
        else:
            raise ConfigError(f"unknown instance source {src!r}")
    ids = [i.name for i in out]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"duplicate instance ids: {dupes[:5]}")
    return out


def random_params(d: dict) -> RandomSuiteParams:
    d = dict(d)
    for key in ("levels", "probs", "weight_range", "weight_levels"):
        if d.get(key) is not None:
            d[key] = tuple(d[key])
    try:
        params = RandomSuiteParams(**d)
        params.validate()
    except TypeError as exc:
        raise ConfigError(f"bad random suite params: {exc}") from exc
    return params


@dataclass(frozen=True)
class ReportRow:
    instance_id: str
    policy: str
    mode: str
    online_value: float
    opt_value: float
    ratio: float
    max_chain_ratio: Optional[float] = None
    chain_bound_ok: Optional[bool] = None
    skipped: bool = False
    reason: str = ""

    def csv_values(self) -> list[str]:
        return [self.instance_id, self.policy, self.mode, fmt(self.online_value),
                fmt(self.opt_value), fmt(self.ratio), fmt(self.max_chain_ratio),
                "1" if self.skipped else "0", self.reason]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("online_value", "opt_value", "ratio", "max_chain_ratio"):
            d[k] = _json_num(d[k])
        return d


def fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".12g")


def _json_num(x):
    if x is None or isinstance(x, (bool, str)):
        return x
    if math.isinf(x) or math.isnan(x):
        return fmt(x)
    return float(fmt(x))


def competitive_ratio(opt: float, online: float) -> float:
    """``opt / online``; infinite if online got nothing but opt did, 1 if both are 0."""
    if online > 0:
        return opt / online
    return INF if opt > 0 else 1.0


def evaluate_instance(inst: Instance, policies: Sequence[PolicySpec], cap: int = DEFAULT_CAP,
                      allow_skips: bool = True) -> list[ReportRow]:
    try:
        opt = offline_optimal(inst, cap=cap).throughput
    except OracleCapExceeded as exc:
        if not allow_skips:
            raise
        return [ReportRow(inst.name, p.label, p.mode.value, math.nan, math.nan, math.nan,
                          skipped=True, reason=str(exc)) for p in policies]
    rows = []
    for spec in policies:
        policy = spec.policy
        outcome, dlog = run(inst, policy, spec.mode)
        online = outcome.throughput
        max_chain = ok = None
        if isinstance(policy, SemiGreedy):
            chains = extract_chains(dlog, policy.alpha, inst)
            if chains:
                max_chain = max(c.ratio for c in chains)
                ok = all(c.ratio <= chain_bound(len(c), policy.alpha) + 1e-9 for c in chains)
        rows.append(ReportRow(inst.name, spec.label, spec.mode.value, online, opt,
                              competitive_ratio(opt, online), max_chain, ok))
    return rows


def _evaluate_star(args):
    return evaluate_instance(*args)


@dataclass
class Report:
    rows: list[ReportRow]
    summary: dict
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_values())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "summary": self.summary,
                           "rows": [r.to_dict() for r in self.rows]},
                          indent=2, sort_keys=True) + "\n"

    def write(self, csv_path=None, json_path=None) -> None:
        if csv_path:
            Path(csv_path).write_text(self.to_csv(), encoding="utf-8")
        if json_path:
            Path(json_path).write_text(self.to_json(), encoding="utf-8")


def summarize(rows: Sequence[ReportRow], labels: Sequence[str]) -> dict:
    per_policy = {}
    for label in labels:
        mine = [r for r in rows if r.policy == label]
        done = [r for r in mine if not r.skipped]
        finite = [r.ratio for r in done if not math.isinf(r.ratio)]
        chains = [r.max_chain_ratio for r in done if r.max_chain_ratio is not None]
        per_policy[label] = {
            "rows": len(mine),
            "skipped": len(mine) - len(done),
            "max_ratio": _json_num(max((r.ratio for r in done), default=math.nan)) if done else None,
            "mean_ratio": _json_num(math.fsum(finite) / len(finite)) if finite else None,
            "infinite_ratios": len(done) - len(finite),
            "max_chain_ratio": _json_num(max(chains)) if chains else None,
        }
    return {
        "rows_in": len(rows),
        "rows_reported": sum(not r.skipped for r in rows),
        "rows_skipped": sum(r.skipped for r in rows),
        "policies": per_policy,
    }


def run_experiment(config: ExperimentConfig, instances: Optional[Sequence[Instance]] = None) -> Report:
    """Evaluate every (instance, policy) pair of ``config``."""
    if not config.policies:
        raise ConfigError("config lists no policies")
    for p in config.policies:
        check_mode(p.policy, p.mode)
    if instances is None:
        instances = load_sources(config.sources, config.seed)
    jobs = [(inst, config.policies, config.oracle_cap, config.allow_skips) for inst in instances]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            nested = list(pool.map(_evaluate_star, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        nested = [_evaluate_star(j) for j in jobs]
    rows = sorted((r for rs in nested for r in rs), key=lambda r: (r.instance_id, r.policy))
    labels = [p.label for p in config.policies]
    log.info("evaluated %d instances x %d policies", len(instances), len(labels))
    return Report(rows, summarize(rows, labels), config.to_dict())


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    max_ratio: float
    mean_ratio: float
    instances: int


def sweep(parameter: str, values: Sequence[float], instances: Sequence[Instance],
          cap: int = DEFAULT_CAP) -> list[SweepRow]:
    """Worst and mean ``opt/online`` over a suite for each alpha (SEMI-GREEDY) or beta (EDF)."""
    if parameter not in ("alpha", "beta"):
        raise ConfigError(f"sweep parameter must be alpha or beta, got {parameter!r}")
    for v in values:
        if not 1 < v <= 4:
            raise ConfigError(f"sweep value {v} outside (1, 4]")
    opts = [offline_optimal(inst, cap=cap).throughput for inst in instances]
    out = []
    for v in values:
        if parameter == "alpha":
            policy, mode = SemiGreedy(alpha=v), VisibilityMode.FADE_UNKNOWN
        else:
            policy, mode = EdfBeta(beta=v), VisibilityMode.FADE_KNOWN
        ratios = [competitive_ratio(opt, run(inst, policy, mode)[0].throughput)
                  for inst, opt in zip(instances, opts)]
        finite = [r for r in ratios if not math.isinf(r)]
        out.append(SweepRow(parameter, v, max(ratios, default=math.nan),
                            math.fsum(finite) / len(finite) if finite else math.nan, len(ratios)))
    return out


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("parameter", "value", "max_ratio", "mean_ratio", "instances"))
    for r in rows:
        w.writerow((r.parameter, fmt(r.value), fmt(r.max_ratio), fmt(r.mean_ratio), r.instances))
    return buf.getvalue()
