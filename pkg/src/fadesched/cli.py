"""Command-line entry point: ``fadesched {gen,run,sweep,oracle,validate}``.

Exit codes: 0 ok, 1 config error, 2 validation violation, 3 oracle cap
exceeded with skips disallowed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ConfigError,
    ExperimentConfig,
    load_sources,
    random_params,
    run_experiment,
    sweep,
    sweep_csv,
)
from .lab import gen_phi_instance, gen_random, gen_ratio2_family, reduce_bounded_delay
from .model import (
    ModelError,
    dump_instance,
    instance_from_dict,
    load_instance,
    outcome_from_dict,
    outcome_to_dict,
    validate_outcome,
)
from .oracle import BoundedDelayInstance, OracleCapExceeded, bounded_delay_optimal, offline_optimal

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_CAP = 0, 1, 2, 3


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "random":
        params = json.loads(args.params) if args.params else {}
        params.setdefault("seed", args.seed)
        if args.count is not None:
            params["count"] = args.count
        if args.packets is not None:
            params["packets"] = args.packets
        if args.fade is not None:
            params["fade"] = args.fade
        for inst in gen_random(random_params(params)):
            dump_instance(inst, out / f"{inst.name}.json")
        return EXIT_OK
    if args.kind == "reduce":
        if not args.source:
            raise ConfigError("gen --kind reduce needs --from BOUNDED_DELAY.json")
        bd = BoundedDelayInstance.from_dict(json.loads(Path(args.source).read_text(encoding="utf-8")))
        inst = reduce_bounded_delay(bd)
        dump_instance(inst, out / "reduced.json")
        value, _ = bounded_delay_optimal(bd)
        _write_json(out / "reduced.expected.json", {"opt": value, "source": "bounded-delay oracle"})
        return EXIT_OK
    family = gen_ratio2_family() if args.kind == "ratio2" else gen_phi_instance()
    for ann in family:
        dump_instance(ann.instance, out / f"{ann.instance.name}.json")
        _write_json(out / f"{ann.instance.name}.expected.json", ann.expected)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.csv:
        cfg.csv_path = args.csv
    if args.json:
        cfg.json_path = args.json
    if args.workers:
        cfg.workers = args.workers
    report = run_experiment(cfg)
    report.write(cfg.csv_path, cfg.json_path)
    if not cfg.csv_path and not cfg.json_path:
        sys.stdout.write(report.to_csv())
    print(json.dumps(report.summary, indent=2, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        return [round(float(v), 12) for v in np.arange(lo, hi + step / 2, step)]
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args) -> int:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        instances = load_sources(cfg.sources, cfg.seed)
        cap = cfg.oracle_cap
    else:
        params = json.loads(args.params) if args.params else {}
        params.setdefault("seed", args.seed)
        instances = gen_random(random_params(params))
        cap = args.cap
    rows = sweep(args.param, _parse_values(args.values), instances, cap=cap)
    text = sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    d = json.loads(Path(args.instance).read_text(encoding="utf-8"))
    if d.get("model") == "bounded-delay":
        value, assignment = bounded_delay_optimal(BoundedDelayInstance.from_dict(d), cap=args.cap)
        payload = {"value": value, "schedule": {str(k): v for k, v in sorted(assignment.items())}}
    else:
        payload = outcome_to_dict(offline_optimal(instance_from_dict(d), cap=args.cap))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        inst = load_instance(args.instance)
    except ModelError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.outcome:
        out = outcome_from_dict(json.loads(Path(args.outcome).read_text(encoding="utf-8")))
        problems = validate_outcome(inst, out)
        for p in problems:
            print(p)
        if problems:
            return EXIT_VIOLATION
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fadesched", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write generated instances as JSON")
    g.add_argument("--kind", choices=("random", "ratio2", "phi", "reduce"), default="random")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--params", help="random suite params as a JSON object")
    g.add_argument("--count", type=int)
    g.add_argument("--packets", type=int)
    g.add_argument("--fade", choices=("constant", "iid", "markov"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--from", dest="source", help="bounded-delay instance to reduce")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--csv")
    r.add_argument("--json")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="worst ratio per alpha or beta value")
    s.add_argument("--param", choices=("alpha", "beta"), required=True)
    s.add_argument("--values", required=True, help="comma list or lo:hi:step")
    s.add_argument("--config", help="take the instance suite from an experiment config")
    s.add_argument("--params", help="random suite params as JSON (when no --config)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cap", type=int, default=12)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="print the offline optimum of one instance")
    o.add_argument("instance")
    o.add_argument("--cap", type=int, default=12)
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("validate", help="check an instance, or an outcome against it")
    v.add_argument("instance")
    v.add_argument("--outcome")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleCapExceeded as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ModelError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
