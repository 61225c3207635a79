import json
import math

import pytest

from conftest import PHI
from fadesched.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    competitive_ratio,
    fmt,
    load_sources,
    run_experiment,
    sweep,
    sweep_csv,
)
from fadesched.lab import gen_phi_instance
from fadesched.model import dump_instance, make_instance
from fadesched.oracle import OracleCapExceeded


def cfg(**kw):
    d = {"instances": [{"generator": "ratio2"}], "policies": ["nonabort-commit"]}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def test_ratio_convention():
    assert competitive_ratio(2.0, 1.0) == 2
    assert competitive_ratio(2.0, 0.0) == math.inf
    assert competitive_ratio(0.0, 0.0) == 1
    assert fmt(math.inf) == "inf" and fmt(1 / 3) == "0.333333333333"


def test_ratio2_nonabort_summary():
    rep = run_experiment(cfg())
    s = rep.summary["policies"]["nonabort-commit"]
    assert s["max_ratio"] == 2.0
    a = next(r for r in rep.rows if r.instance_id == "ratio2-A")
    assert (a.online_value, a.opt_value, a.ratio) == (1.0, 2.0, 2.0)


def test_phi_branch1_commit_p1():
    rep = run_experiment(cfg(instances=[{"generator": "phi"}], policies=["priority:order=p1/p2"]),
                         instances=[gen_phi_instance()[0].instance])
    (row,) = rep.rows
    assert row.online_value == 1
    assert row.ratio == pytest.approx(PHI, abs=1e-6)


def test_empty_instance_list():
    rep = run_experiment(cfg(instances=[]))
    assert rep.rows == []
    assert rep.summary["rows_in"] == 0 and rep.summary["rows_reported"] == 0
    assert rep.to_csv() == ",".join(CSV_COLUMNS) + "\n"


def test_rows_sorted_and_one_per_pair():
    c = cfg(instances=[{"generator": "random", "params": {"count": 6, "packets": 5}}],
            policies=["semi-greedy", "edf:beta=2", "greedy-max"])
    rep = run_experiment(c)
    assert len(rep.rows) == 18
    keys = [(r.instance_id, r.policy) for r in rep.rows]
    assert keys == sorted(keys)
    assert all(r.ratio >= 1 - 1e-12 for r in rep.rows)
    assert all(r.chain_bound_ok for r in rep.rows if r.policy.startswith("semi-greedy") and r.max_chain_ratio)


def test_deterministic_and_worker_independent(tmp_path):
    d = {"instances": [{"generator": "random", "params": {"count": 12, "packets": 6, "fade": "markov"}}],
         "policies": ["semi-greedy", {"policy": "edf:beta=2", "mode": "fade_known"}], "seed": 7}
    outs = []
    for workers in (1, 1, 2):
        rep = run_experiment(ExperimentConfig.from_dict(dict(d, workers=workers)))
        outs.append((rep.to_csv(), rep.to_json()))
    assert outs[0] == outs[1] == outs[2]


def test_seed_changes_output():
    base = {"instances": [{"generator": "random", "params": {"count": 5}}], "policies": ["semi-greedy"]}
    a = run_experiment(ExperimentConfig.from_dict(dict(base, seed=1))).to_csv()
    b = run_experiment(ExperimentConfig.from_dict(dict(base, seed=2))).to_csv()
    assert a != b


def big_instance():
    return make_instance([(f"x{k}", 1, 1.0, 4) for k in range(14)], [1.0] * 4, name="big")


def test_skips_are_counted():
    small = make_instance([("a", 1, 1.0, 1)], [1.0], name="small")
    rep = run_experiment(cfg(policies=["semi-greedy", "greedy-max"]), instances=[big_instance(), small])
    s = rep.summary
    assert s["rows_in"] == 4 and s["rows_skipped"] == 2
    assert s["rows_in"] == s["rows_reported"] + s["rows_skipped"]
    skipped = [r for r in rep.rows if r.skipped]
    assert all("cap" in r.reason for r in skipped)
    assert ",1," in rep.to_csv().splitlines()[1]


def test_skips_disallowed_raise():
    with pytest.raises(OracleCapExceeded):
        run_experiment(cfg(allow_skips=False), instances=[big_instance()])


@pytest.mark.parametrize("bad", [
    {"policies": [{"policy": "edf:beta=2", "mode": "fade_unknown"}]},
    {"policies": ["no-such-policy"]},
    {"policies": ["semi-greedy:alpha=0.5"]},
    {"oracle_cap": 0},
    {"policies": [{"mode": "fade_known"}]},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_unknown_generator_and_duplicate_ids(tmp_path):
    with pytest.raises(ConfigError):
        load_sources([{"generator": "nope"}])
    with pytest.raises(ConfigError):
        load_sources([{"generator": "phi"}, {"generator": "phi"}])


def test_files_source(tmp_path):
    inst = make_instance([("a", 1, 2.0, 2)], [0.5, 0.5])
    (tmp_path / "suite").mkdir()
    dump_instance(inst, tmp_path / "suite" / "one.json")
    (tmp_path / "suite" / "one.expected.json").write_text("{}")
    conf = tmp_path / "exp.json"
    conf.write_text(json.dumps({"instances": {"files": "suite/*.json"}, "policies": ["semi-greedy"]}))
    rep = run_experiment(ExperimentConfig.load(conf))
    assert [r.instance_id for r in rep.rows] == ["one"]
    assert rep.rows[0].ratio == 1


def test_sweep_rows():
    inst = gen_phi_instance()[0].instance
    rows = sweep("alpha", [1.5, PHI, 2.0], [inst])
    assert [r.value for r in rows] == [1.5, PHI, 2.0]
    assert all(r.instances == 1 for r in rows)
    assert sweep_csv(rows).count("\n") == 4
    rows = sweep("beta", [2.0], [inst])
    assert rows[0].max_ratio >= 1
    with pytest.raises(ConfigError):
        sweep("alpha", [0.9], [inst])
    with pytest.raises(ConfigError):
        sweep("gamma", [2.0], [inst])
