import json
import subprocess
import sys

import pytest

from cycloop.cli import main


def run(args, out, capsys):
    code = main(args + ["--out", str(out)])
    return code, capsys.readouterr()


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_oracle_check_example(tmp_path, capsys):
    code, io = run(["oracle-check", "--graph", "edge", "--beta", "1", "--h", "0", "--samples", "1e6",
                    "--seed", "7"], tmp_path, capsys)
    rep = json.loads(io.out)
    assert code == 0 and abs(rep["z_score"]) < 3
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["seed"] == 7 and man["config"]["samples"] == 10 ** 6 and "version" in man


def test_pd_test_example(tmp_path, capsys):
    code, io = run(["pd-test", "--theta", "2", "--n", "100000", "--seed", "1"], tmp_path, capsys)
    assert code == 0 and json.loads(io.out)["pass"] is True


def test_missing_seed_exit_2():
    res = subprocess.run([sys.executable, "-m", "cycloop", "pd-test", "--theta", "2"], capture_output=True, text=True)
    assert res.returncode == 2 and "--seed" in res.stderr


def test_missing_seed_in_config_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"theta": 2.0, "n": 1000}))
    with pytest.raises(SystemExit) as exc:
        main(["pd-test", "--config", str(cfg)])
    assert exc.value.code == 2


def test_config_file_supplies_options(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": "edge", "beta": 0.5, "samples": 200, "seed": 4}))
    a, io_a = run(["sample", "--config", str(cfg)], tmp_path / "a", capsys)
    b, io_b = run(["sample", "--graph", "edge", "--beta", "0.5", "--samples", "200", "--seed", "4"],
                  tmp_path / "b", capsys)
    assert a == b == 0 and io_a.out == io_b.out


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "bogus": 3}))
    with pytest.raises(SystemExit) as exc:
        main(["pd-test", "--theta", "1", "--config", str(cfg)])
    assert exc.value.code == 2


@pytest.mark.parametrize("args", [
    ["sample", "--graph", "triangle", "--beta", "1", "--model", "loops"],
    ["oracle-check", "--graph", "complete:13", "--beta", "1"],
    ["oracle-check", "--graph", "complete:9", "--beta", "1"],
    ["mcmc", "--graph", "edge", "--beta", "1", "--steps", "10", "--burn-in", "20"],
    ["sample", "--graph", "wheel:4", "--beta", "1"],
])
def test_invalid_combinations(args, tmp_path, capsys):
    code, io = run(args + ["--seed", "1"], tmp_path, capsys)
    assert code == 2
    assert len(io.err.strip().splitlines()) == 1 and io.out == ""


def test_negative_beta_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sample", "--graph", "edge", "--beta", "-1", "--seed", "1", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_env_var_sets_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CYCLOOP_OUT", str(tmp_path / "env"))
    assert main(["split-merge", "--steps", "5", "--seed", "1"]) == 0
    capsys.readouterr()
    assert (tmp_path / "env" / "split_merge.csv").exists()


COMMANDS = [
    ["sample", "--graph", "lattice:2:3", "--beta", "1", "--model", "loops", "--samples", "50"],
    ["mcmc", "--graph", "complete:4", "--beta", "1", "--theta", "2", "--steps", "3000", "--workers", "2"],
    ["mcmc", "--graph", "cycle:4", "--beta", "1", "--theta", "0.5", "--model", "loops", "--sampler", "ct",
     "--steps", "40"],
    ["schramm", "--n", "40", "--samples", "200", "--workers", "2"],
    ["split-merge", "--steps", "30", "--horizon", "3", "--beta-s", "0.5"],
    ["pd-test", "--theta", "0.5", "--n", "2000"],
    ["bound", "--graph", "lattice:2:4", "--beta", "0.02", "--theta", "2", "--samples", "200"],
    ["contact", "--graph", "complete:15", "--beta", "0.2", "--samples", "10"],
    ["oracle-check", "--graph", "path:3", "--beta", "0.5", "--h", "0.3", "--samples", "20000", "--workers", "2"],
]


@pytest.mark.parametrize("args", COMMANDS, ids=lambda a: a[0])
def test_byte_identical_reruns(args, tmp_path, capsys):
    c1, io1 = run(args + ["--seed", "13"], tmp_path / "a", capsys)
    c2, io2 = run(args + ["--seed", "13"], tmp_path / "b", capsys)
    assert c1 == c2 and c1 in (0, 1)
    assert io1.out == io2.out
    assert files(tmp_path / "a") == files(tmp_path / "b")
    assert "manifest.json" in files(tmp_path / "a")


def test_workers_change_stream_but_not_shape(tmp_path, capsys):
    base = ["oracle-check", "--graph", "edge", "--beta", "1", "--samples", "20000", "--seed", "3"]
    _, one = run(base, tmp_path / "a", capsys)
    _, two = run(base + ["--workers", "2"], tmp_path / "b", capsys)
    a, b = json.loads(one.out), json.loads(two.out)
    assert a["n_samples"] == b["n_samples"] == 20000 and a["exact"] == b["exact"]


def test_csv_headers(tmp_path, capsys):
    run(COMMANDS[0] + ["--seed", "1"], tmp_path, capsys)
    assert (tmp_path / "samples.csv").read_text().startswith("step,n_bridges,n_objects,len_1,")
    assert (tmp_path / "bridges.csv").read_text().startswith("edge_u,edge_v,time")
    assert (tmp_path / "decomposition.csv").read_text().startswith("cycle_id,length,winding,n_strands")


def test_bound_empirical_pass(tmp_path, capsys):
    code, io = run(["bound", "--graph", "lattice:2:5", "--beta", "0.02", "--theta", "1", "--samples", "2000",
                    "--seed", "2"], tmp_path, capsys)
    rep = json.loads(io.out)
    assert code == 0 and all(r["pass"] for r in rep["bounds"])
