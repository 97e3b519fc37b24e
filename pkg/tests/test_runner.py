import json

import numpy as np
import pytest

from fairaudit import runner
from fairaudit.errors import ConfigError, ParseError
from fairaudit.fairness import NOTIONS
from fairaudit.runner import AuditConfig, AuditRecord


def small_cfg(**run):
    d = {
        "data": {"preset": "els-like", "n_rows": 600, "seed": 2},
        "scenarios": ["RNA.rnd", "Imp.prop.frac.perturb-race"],
        "imputers": [{"kind": "simple"}],
        "models": [{"kind": "DT", "max_depth": 3}],
        "run": {"trials": 2, "master_seed": 5, **run},
    }
    return AuditConfig.from_dict(d)


@pytest.fixture(scope="module")
def records():
    return runner.run_audit(small_cfg())


def test_record_count_per_cell(records):
    K = 5
    per_cell = K * len(NOTIONS) + (K + 1) + K
    assert len(records) == 2 * 2 * per_cell
    first = [r for r in records if r.scenario == "RNA.rnd" and r.trial == 0]
    assert len(first) == per_cell
    assert sum(r.metric == "accuracy" for r in first) == K + 1


def test_accounting_consistency(records):
    for r in records:
        assert 0 <= r.predicted_positives <= r.test_group_size
    for scn in ("RNA.rnd", "Imp.prop.frac.perturb-race"):
        sp = [r for r in records if r.scenario == scn and r.trial == 0 and r.metric == "SP"]
        total = next(r for r in records if r.scenario == scn and r.trial == 0 and r.group == "all")
        assert sum(r.test_group_size for r in sp) == total.test_group_size
        assert sum(r.predicted_positives for r in sp) == total.predicted_positives


def test_rna_rows_carry_no_imputer(records):
    assert {r.imputer for r in records if r.scenario == "RNA.rnd"} == {"none"}
    assert {r.imputer for r in records if r.scenario != "RNA.rnd"} == {"simple-mean"}


def test_seed_isolation():
    a = runner.run_audit(small_cfg(trials=1))
    b = runner.run_audit(small_cfg(trials=3))
    assert a == [r for r in b if r.trial == 0]


def test_trial_seed_is_documented_mixer():
    import hashlib
    s = runner.trial_seed(5, "RNA.rnd", "none", "DT", 3)
    h = hashlib.blake2b(b"5|RNA.rnd|none|DT|3", digest_size=8).digest()
    assert s == int.from_bytes(h, "big")


def test_parallel_matches_serial():
    serial = runner.run_audit(small_cfg())
    par = runner.run_audit(small_cfg(workers=2))
    assert serial == par


def test_failing_cell_is_recorded_not_raised():
    cfg = AuditConfig.from_dict({
        "data": {"synth": {"n_rows": 40, "group_shares": {"A": 0.5, "B": 0.5}, "n_features": 2,
                           "label_group_offset": {"A": -30.0, "B": -30.0}}},
        "scenarios": ["RNA.rnd"], "models": ["Log", "DT"], "run": {"trials": 1},
    })
    recs = runner.run_audit(cfg)
    err = [r for r in recs if r.metric == "error"]
    assert len(err) == 1 and err[0].model == "Log" and err[0].group == "train"
    assert any(r.model == "DT" and r.metric == "SP" for r in recs)


def test_summarize_conventions():
    mk = lambda t, v, g="A": AuditRecord("S", "none", "M", t, g, "SP", v, 3, 1)
    s = runner.summarize([mk(0, 0.1), mk(1, 0.3), mk(0, None, "B"), mk(1, None, "B"), mk(0, 0.5, "C")])
    a, b, c = s
    assert a.mean == pytest.approx(0.2) and a.std == pytest.approx(0.141421356, abs=1e-6)
    assert (a.n_defined, a.n_undefined) == (2, 0)
    assert b.mean is None and b.std is None and (b.n_defined, b.n_undefined) == (0, 2)
    assert c.std == 0.0 and c.n_defined == 1


def test_emit_and_reread(records, tmp_path):
    summary = runner.summarize(records)
    runner.emit(records, summary, tmp_path / "a")
    runner.emit(records, summary, tmp_path / "b")
    for name in ("records.csv", "summary.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "records.csv").read_text().splitlines()
    assert len(lines) == len(records) + 1
    assert runner.read_records_csv(tmp_path / "a" / "records.csv") == records
    sp = (tmp_path / "a" / "plotdata" / "SP__DT.csv").read_text().splitlines()
    assert sp[0].split(",")[:6] == ["scenario", "Asian", "Black", "Hispanic", "Multiracial", "White"]
    assert [l.split(",")[0] for l in sp[1:]] == ["RNA.rnd", "Imp.prop.frac.perturb-race[simple-mean]"]
    js = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert len(js) == len(summary)


def test_emit_empty(tmp_path):
    runner.emit([], [], tmp_path)
    assert (tmp_path / "records.csv").read_text() == ",".join(runner.RECORD_FIELDS) + "\n"
    assert (tmp_path / "summary.csv").read_text() == ",".join(runner.SUMMARY_FIELDS) + "\n"


def test_read_records_malformed(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError):
        runner.read_records_csv(p)
    p.write_text(",".join(runner.RECORD_FIELDS) + "\nS,none,M,x,A,SP,0.1,1,3,1\n")
    with pytest.raises(ParseError):
        runner.read_records_csv(p)


@pytest.mark.parametrize("patch", [
    {"run": {"trials": 0}},
    {"scenarios": []},
    {"models": []},
    {"imputers": []},
    {"run": {"colour": 1}},
    {"extra": {}},
    {"data": {"preset": "els-like", "csv": "x.csv"}},
])
def test_config_validation(patch):
    d = {"data": {"preset": "els-like", "n_rows": 100}, "scenarios": ["Imp.rnd"],
         "imputers": [{"kind": "simple"}], "models": ["Log"]}
    d.update(patch)
    with pytest.raises(ConfigError):
        AuditConfig.from_dict(d)


def test_csv_paths_resolve_relative_to_config(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({
        "data": {"csv": "d.csv", "schema": "s.json"}, "scenarios": ["RNA.rnd"], "models": ["DT"]}))
    cfg = runner.load_config(tmp_path / "cfg.json")
    assert cfg.data.csv == str(tmp_path / "d.csv")
