import json
import os
import subprocess
import sys

import pytest

from frontprop import cli


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "frontprop.cli"] + args,
                          capture_output=True, text=True)


def write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    write(cfg, "seed=1\nalpha3=1\n")
    res = run_cli(["validate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.returncode == 2
    assert "alpha3" in res.stderr


def test_missing_seed_rejected(tmp_path):
    cfg = tmp_path / "noseed.cfg"
    write(cfg, "a=1\n")
    res = run_cli(["validate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.returncode == 2
    assert "seed" in res.stderr


def test_validate_strict_defaults(tmp_path):
    cfg = tmp_path / "strict.cfg"
    write(cfg, "seed=1\nmode=strict\na=1\ntheta=0.1\nalpha1=0.3\nalpha2=0.5\n"
               "eps0=0.01\np=0.5\nL=2825761\n")
    out = tmp_path / "out"
    res = run_cli(["validate", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0
    assert "window M = 40" in res.stdout
    assert "9" in res.stdout
    assert "2825761" in res.stdout
    blob = json.loads((out / "validate.json").read_text())
    assert blob["valid"] and blob["required_L_strict"] == 2825761


def test_parse_config_types(tmp_path):
    cfg = tmp_path / "c.cfg"
    write(cfg, "seed=9\neps_list=0,0.1\nt_grid=10,20\nreplicas=5\n# comment\n")
    parsed = cli.parse_config(str(cfg))
    assert parsed["seed"] == 9
    assert parsed["eps_list"] == [0.0, 0.1]
    assert parsed["t_grid"] == [10.0, 20.0]


def test_simulate_outputs(tmp_path):
    cfg = tmp_path / "s.cfg"
    write(cfg, "seed=11\nprofile=finite\nt_max=10\neps=0.0\n")
    out = tmp_path / "simout"
    res = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0
    front = (out / "front.csv").read_text().splitlines()
    assert front[0] == "sigma_n,r"
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0].startswith("event_index,time,kind")


def test_byte_identical_reruns(tmp_path):
    cfg = tmp_path / "r.cfg"
    write(cfg, "seed=21\nprofile=finite\nt_max=12\neps=0.05\n")
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        res = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
        assert res.returncode == 0
        payload = {}
        for fn in sorted(os.listdir(out)):
            if fn == "run.log":
                continue  # timestamps live only in the sidecar log
            payload[fn] = (out / fn).read_bytes()
        outs.append(payload)
    assert outs[0] == outs[1]


def test_seed_override(tmp_path):
    cfg = tmp_path / "r.cfg"
    write(cfg, "seed=21\nprofile=finite\nt_max=12\n")
    o1, o2 = tmp_path / "a", tmp_path / "b"
    run_cli(["simulate", "--config", str(cfg), "--out", str(o1)])
    run_cli(["simulate", "--config", str(cfg), "--out", str(o2), "--seed", "22"])
    assert (o1 / "front.csv").read_bytes() != (o2 / "front.csv").read_bytes()


def test_slowdown_subcommand(tmp_path):
    cfg = tmp_path / "sl.cfg"
    write(cfg, "seed=5\n")
    out = tmp_path / "slout"
    res = run_cli(["slowdown", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0
    assert "constant: slope=" in res.stdout
    assert "PASS" in res.stdout
    data = (out / "slowdown_constant.csv").read_text().splitlines()
    assert data[0] == "t,log10_p,log_neg_log_p"


def test_prob_cell_formatting():
    assert cli.prob_cell(0.25) == "0.25"
    assert cli.prob_cell(0.0) == "0"
    cell = cli.prob_cell(1e-12)
    assert cell.startswith("log10:")
    assert abs(float(cell.split(":")[1]) + 12.0) < 1e-9


def test_decouple_subcommand(tmp_path):
    cfg = tmp_path / "d.cfg"
    write(cfg, "seed=31\nm=3\nell=3\nalpha=0.5\nreplicas=60\n")
    out = tmp_path / "dout"
    res = run_cli(["decouple", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0, res.stdout + res.stderr
    blob = json.loads((out / "decouple.json").read_text())
    assert blob["identities_ok"] == blob["samples"]


def test_speed_subcommand_small(tmp_path):
    cfg = tmp_path / "sp.cfg"
    write(cfg, "seed=8\nt_grid=15,30\nreplicas=24\nn_jobs=2\n")
    out = tmp_path / "spout"
    res = run_cli(["speed", "--config", str(cfg), "--out", str(out)])
    assert res.returncode in (0, 1)  # tiny replica counts may fail verdicts
    data = (out / "speed.csv").read_text().splitlines()
    assert data[0] == "t,v,lo,hi" and len(data) == 3
    blob = json.loads((out / "speed.json").read_text())
    assert "v_t15" in blob["estimates"]


def test_appendix_a_subcommand(tmp_path):
    cfg = tmp_path / "aa.cfg"
    write(cfg, "seed=13\nreplicas=4000\nn_grid=1,2,5,10,20\nlevel=4.0\n")
    out = tmp_path / "aaout"
    res = run_cli(["appendixA", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0, res.stdout + res.stderr
    rows = (out / "appendix_a.csv").read_text().splitlines()
    assert rows[0] == "sqrt_n,p_or_log10"


def test_renewal_subcommand_small(tmp_path):
    cfg = tmp_path / "rn.cfg"
    write(cfg, "seed=5\neps=0.1\nrecords=3\nhorizon=350\ncensor=10\n"
               "theta=0.4\nalpha1=0.9\nalpha2=1.0\neps0=0.1\np=0.6\nL=8\nM=16\n")
    out = tmp_path / "rnout"
    res = run_cli(["renewal", "--config", str(cfg), "--out", str(out)])
    assert res.returncode in (0, 1), res.stdout + res.stderr
    rows = (out / "renewal_records.csv").read_text().splitlines()
    assert rows[0] == "record,attempt,S_k,R_k,D_k,censored,reason"
    blob = json.loads((out / "renewal_summary.json").read_text())
    assert "censored_fraction" in blob
