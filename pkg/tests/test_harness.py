import csv
import json
import math

import pytest

from lgtrecon.coupling import (build_coupled_pair, deep_clusters, good_event, injected_triple,
                               nonrecoverability_demo)
from lgtrecon.errors import ConfigError, InputError
from lgtrecon.harness import (ExperimentConfig, build_species, clopper_pearson, load_config,
                              report, run_experiment, run_trial, sweep)
from lgtrecon.lgt import LgtEvent, apply_events
from lgtrecon.tree import Location, rf_distance, same_tree

BASE = {"seed": 3, "trials": 4, "genes": 12, "method": "qp", "generator": "yule",
        "yule": {"n": 8}, "lgt": {"target_lambda": 0.5}}


def cfg(**kw):
    raw = dict(BASE)
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


@pytest.mark.parametrize("raw", [
    {"bogus": 1},
    {"method": "ml"},
    {"generator": "coalescent"},
    {"lgt": {"lambda_bar": 1.0, "target_lambda": 2.0}},
    {"lgt": {}},
    {"lgt": {"lambda_bar": 1, "p": 0}},
    {"lgt": {"lambda_bar": 1}, "yule": {"n": 1}},
    {"lgt": {"lambda_bar": 1}, "yule": {"size": 5}},
    {"lgt": {"lambda_bar": 1}, "gtr": {"pi": [1, 0, 0, 0]}},
    {"lgt": {"lambda_bar": 1}, "generator": "newick"},
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_config_from_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 5\ngenes: 7\nlgt: {target_lambda: 1.0, R: .inf}\n"
                 "newick: {path: sp.nwk}\n")
    c = load_config(p)
    assert c.seed == 5 and c.genes == 7 and math.isinf(c.R)
    assert c.newick_path == str(tmp_path / "sp.nwk")
    (tmp_path / "bad.yaml").write_text("seed: [1\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")


def test_target_lambda_is_met():
    sp = build_species(cfg(), 0)
    from lgtrecon.species import lgt_weights
    assert lgt_weights(sp).extant == pytest.approx(0.5)


def test_newick_generator(tmp_path):
    (tmp_path / "sp.nwk").write_text("((a:1,b:1):1,(c:1,d:1):1);\n")
    (tmp_path / "r.csv").write_text("edge,lambda\n1,0.5\n")
    c = ExperimentConfig.from_dict({"generator": "newick", "genes": 5, "trials": 2,
                                    "newick": {"path": "sp.nwk", "rates": "r.csv"}},
                                   base_dir=tmp_path)
    sp = build_species(c, 0)
    assert sp.lam[1] == 0.5
    assert run_experiment(c).trials == 2


def test_lgt_free_always_succeeds():
    for method in ("qp", "mt"):
        res = run_experiment(cfg(method=method, lgt={"lambda_bar": 0}))
        assert res.success_rate == 1.0


def test_mt_seq_and_rr_run():
    rec = run_trial(cfg(method="mt-seq", seq={"k": 300, "rate": 0.2}), 0)
    assert rec.rf >= 0 or rec.aborted
    rec = run_trial(cfg(method="rr", highways={"gamma_lo": 0.3}), 0)
    assert rec.highways_called >= 0


def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0.0 and hi == pytest.approx(0.3084971, abs=1e-6)
    lo, hi = clopper_pearson(10, 10)
    assert hi == 1.0 and lo == pytest.approx(0.6915029, abs=1e-6)
    lo, hi = clopper_pearson(5, 10)
    assert lo == pytest.approx(0.1870860, abs=1e-6) and hi == pytest.approx(0.8129140, abs=1e-6)


def test_outputs_are_byte_identical_across_thread_counts(tmp_path):
    c = cfg(trials=4)
    run_experiment(c, threads=1, out=tmp_path / "a")
    run_experiment(c, threads=2, out=tmp_path / "b")
    for name in ("trials.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "trials.csv")))
    assert [int(r["trial"]) for r in rows] == [0, 1, 2, 3]
    assert "runtime" not in rows[0]
    timings = list(csv.DictReader(open(tmp_path / "a" / "timings.csv")))
    assert len(timings) == 4


def test_trial_is_independent_of_experiment_size():
    a = run_trial(cfg(trials=2), 1)
    b = run_experiment(cfg(trials=5)).records[1]
    assert (a.events, a.rf, a.seed) == (b.events, b.rf, b.seed)


def test_sweep_and_report(tmp_path):
    rows = sweep(cfg(trials=2), "N", [3, 10], out=tmp_path)
    assert [r["value"] for r in rows] == [3, 10]
    files = report(tmp_path / "sweep.csv", tmp_path / "plot")
    assert [f.name for f in files] == ["N.dat"]
    lines = [ln for ln in files[0].read_text().splitlines() if not ln.startswith("#")]
    assert len(lines) == 2 and all(len(ln.split()) == 2 for ln in lines)
    summary = json.loads((tmp_path / "plot" / "summary.json").read_text())
    assert set(summary) == {"N"}
    with pytest.raises(ConfigError):
        sweep(cfg(), "colour", [1])


def test_report_one_point_pass_through(tmp_path):
    sweep(cfg(trials=2), "p", [1.0], out=tmp_path)
    files = report(tmp_path / "sweep.csv", tmp_path / "plot")
    row = next(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert files[0].read_text().splitlines()[1] == f"{row['value']} {row['success_rate']}"
    first = files[0].read_bytes()
    report(tmp_path / "sweep.csv", tmp_path / "plot")
    assert files[0].read_bytes() == first


# coupling -------------------------------------------------------------------


def test_coupled_pair_structure():
    pair = build_coupled_pair(16, 1.0)
    a, b, c, d = pair.abcd
    t1, t2 = pair.first, pair.second
    assert t1.parent[a] == t1.parent[b] and t1.parent[c] == t1.parent[d]
    assert t2.parent[a] == t2.parent[c] and t2.parent[b] == t2.parent[d]
    assert rf_distance(t1, t2) > 0
    assert list(t1.edge_start) == list(t2.edge_start)
    with pytest.raises(InputError):
        build_coupled_pair(12)


def test_zero_lgt_genes_differ():
    rep = nonrecoverability_demo(16, 0.0, 3, 4, seed=1)
    assert rep.coincidence_rate == 0.0
    assert rep.subtree_identity_always


def test_injected_triple_makes_genes_identical():
    pair = build_coupled_pair(16)
    events = injected_triple(pair)
    assert good_event(events, pair.abcd)
    g1 = apply_events(pair.first, events)
    g2 = apply_events(pair.second, events)
    assert same_tree(g1, g2, atol=1e-12)
    assert deep_clusters(g1, pair.height) == deep_clusters(g2, pair.height)


def test_good_event_needs_consecutive_common_donor():
    pair = build_coupled_pair(16)
    a, b, c, d = pair.abcd
    s = pair.first.edge_start
    ev = lambda t, r, dn: LgtEvent(t, Location(r, t - s[r]), Location(dn, t - s[dn]))
    assert not good_event([ev(1.2, d, a), ev(1.5, c, a), ev(1.8, b, c)], pair.abcd)
    assert not good_event([ev(1.2, d, a), ev(1.4, b, d), ev(1.5, c, a), ev(1.8, b, a)], pair.abcd)
    assert good_event([ev(1.1, b, d), ev(1.2, d, a), ev(1.5, c, a), ev(1.8, b, a)], pair.abcd)
