import json
import subprocess
import sys

import numpy as np
import pytest

from partsim.cli import main
from partsim.data import write_interactions
from partsim.fpsr import local_learn
from partsim.modelio import load_model
from partsim.splitter import load_split
from partsim.synthetic import community_catalog


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    m, _ = community_catalog(400, 90, 5, mean_len=10, seed=4)
    write_interactions(m, d / "inter.tsv")
    return d / "inter.tsv"


@pytest.fixture(scope="module")
def split_dir(tmp_path_factory, data_file):
    out = tmp_path_factory.mktemp("split")
    assert main(["split", str(data_file), "--sep", "tab", "--seed", "1", "--out", str(out)]) == 0
    return out


def _manifest(d):
    return json.loads((d / "run.manifest.json").read_text())


def test_stats(tmp_path, data_file):
    assert main(["stats", str(data_file), "--sep", "tab", "--out", str(tmp_path)]) == 0
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert set(stats) == {"users", "items", "interactions", "density", "gini_user", "gini_item"}


def test_missing_file(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "nope.tsv"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_flag_is_usage_error(tmp_path):
    assert main(["split", "--bogus"]) == 2


def test_malformed_data_is_runtime_error(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("a\tb\nc\n")
    assert main(["stats", str(p), "--sep", "tab", "--out", str(tmp_path / "o")]) == 3


def test_split_deterministic_and_seeded(tmp_path, data_file, split_dir):
    again = tmp_path / "again"
    other = tmp_path / "other"
    main(["split", str(data_file), "--sep", "tab", "--seed", "1", "--out", str(again)])
    main(["split", str(data_file), "--sep", "tab", "--seed", "2", "--out", str(other)])
    assert _manifest(again)["files_written"] == _manifest(split_dir)["files_written"]
    assert _manifest(other)["content_digest"] != _manifest(split_dir)["content_digest"]
    b = load_split(split_dir)
    for u in range(b.train.n_users):
        assert not set(b.train.row(u)) & set(b.test.row(u))


def test_unknown_model(tmp_path, split_dir, capsys):
    assert main(["fit", "--split", str(split_dir), "--model", "lightgcn", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "fpsr" in err and "ease" in err


def test_fit_reads_train_only_and_is_idempotent(tmp_path, split_dir):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["fit", "--split", str(split_dir), "--model", "fpsr", "--param", "tau=0.5",
                   "--param", "d=8", "--out", str(out)])
        assert rc == 0
        outs.append(out)
    man = _manifest(outs[0])
    assert not any(p.endswith("test.tsv") or p.endswith("valid.tsv") for p in man["files_read"])
    assert man["files_written"] == _manifest(outs[1])["files_written"]
    diag = json.loads((outs[0] / "diagnostics.json").read_text())
    assert diag["footprint"]["block_cost"] == sum(s * s for s in load_model(outs[0] / "model.bin").metadata["sizes"])


def test_fit_single_block_equals_local_learner(tmp_path, split_dir):
    rc = main(["fit", "--split", str(split_dir), "--model", "fpsr", "--param", "tau=1.0",
               "--param", "lam=0", "--param", "local_l2=25", "--out", str(tmp_path)])
    assert rc == 0
    model = load_model(tmp_path / "model.bin")
    train = load_split(split_dir, ("train",)).train
    np.testing.assert_array_equal(model.sparse.toarray(), local_learn(train.csc, 25))


def test_config_file_and_flag_override(tmp_path, split_dir):
    conf = tmp_path / "fit.json"
    conf.write_text(json.dumps({"model": "itemknn", "params": {"k": 5, "shrink": 1.0}}))
    out = tmp_path / "o"
    assert main(["fit", "--split", str(split_dir), "--param", "k=7", "--config", str(conf),
                 "--out", str(out)]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["model"] == "itemknn" and diag["params"] == {"k": 7, "shrink": 1.0}


def test_bad_config_and_params(tmp_path, split_dir):
    conf = tmp_path / "fit.json"
    conf.write_text(json.dumps({"modle": "ease"}))
    assert main(["fit", "--split", str(split_dir), "--model", "ease", "--config", str(conf),
                 "--out", str(tmp_path)]) == 2
    assert main(["fit", "--split", str(split_dir), "--model", "ease", "--param", "k=3",
                 "--out", str(tmp_path)]) == 2
    assert main(["fit", "--split", str(split_dir), "--model", "fpsr", "--param", "tau=3",
                 "--out", str(tmp_path)]) == 3


def test_eval_segments(tmp_path, split_dir):
    model_dir = tmp_path / "m"
    main(["fit", "--split", str(split_dir), "--model", "itemknn", "--out", str(model_dir)])
    plain, seg = tmp_path / "plain", tmp_path / "seg"
    assert main(["eval", "--model-file", str(model_dir / "model.bin"), "--split", str(split_dir),
                 "--out", str(plain)]) == 0
    assert main(["eval", "--model-file", str(model_dir / "model.bin"), "--split", str(split_dir),
                 "--head-fraction", "0.1", "--out", str(seg)]) == 0
    rows = json.loads((plain / "report.json").read_text())
    assert {r["segment"] for r in rows} == {"overall"}
    rows = json.loads((seg / "report.json").read_text())
    assert {r["segment"] for r in rows} == {"head", "overall", "tail"}
    assert _manifest(seg)["audits"]["hit_decomposition"] is True
    assert (seg / "report.csv").read_text().startswith("model,dataset,segment,K,metric,value,p_value_vs_baseline")


def test_bench_and_sweep(tmp_path, split_dir):
    conf = tmp_path / "bench.json"
    conf.write_text(json.dumps({"dataset": "toy", "baseline": "itemknn", "models": [
        {"name": "mostpop"}, {"name": "itemknn", "params": {"k": 20}},
        {"name": "fpsr", "params": {"tau": 0.5, "d": 8}}]}))
    out1, out2 = tmp_path / "b1", tmp_path / "b2"
    for out in (out1, out2):
        assert main(["bench", "--config", str(conf), "--split", str(split_dir), "--out", str(out)]) == 0
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
    assert all(v["no_train_items"] and v["hit_decomposition"] for v in _manifest(out1)["audits"].values())
    sw = tmp_path / "sw"
    assert main(["sweep", "--split", str(split_dir), "--tau-best", "0.5", "--param", "d=8",
                 "--out", str(sw)]) == 0
    lines = (sw / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("family,label,tau,recall@20,ndcg@20") and len(lines) == 5


def test_bench_requires_config(tmp_path, split_dir):
    assert main(["bench", "--split", str(split_dir), "--out", str(tmp_path)]) == 2


def test_hpo_never_touches_test(tmp_path, split_dir):
    work = tmp_path / "split"
    work.mkdir()
    for f in ("train.tsv", "valid.tsv", "split.manifest.json"):
        (work / f).write_bytes((split_dir / f).read_bytes())
    # no test.tsv at all: hpo must still succeed
    out = tmp_path / "hpo"
    assert main(["hpo", "--split", str(work), "--model", "itemknn", "--budget", "3", "--out", str(out)]) == 0
    lines = (out / "trials.jsonl").read_text().splitlines()
    assert len(lines) == 3
    best = json.loads((out / "best.json").read_text())
    assert best["best_index"] is not None


def test_module_entry_point(tmp_path, data_file):
    r = subprocess.run([sys.executable, "-m", "partsim", "stats", str(data_file), "--sep", "tab",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "stats.json").exists()
