import json
import subprocess
import sys

import pytest

from kpzcubic import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_det_default_m1(capsys):
    code, out, _ = run(["det"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass"] is True
    assert set(rep["results"]["det"]) == {"re", "im"}
    assert 0 < rep["results"]["det"]["re"] < 1


def test_length_mismatch_names_field(capsys):
    code, _, err = run(["det", "--h", "0,1", "--gamma", "0", "--tau", "1,2"], capsys)
    assert code == 2
    assert "'gamma'" in err


def test_broken_ordering_is_input_error(capsys):
    code, _, err = run(["suite", "--criteria", "2", "--h", "0,1", "--gamma", "0,0", "--tau", "2,1"], capsys)
    assert code == 2
    assert "tau" in err


def test_unknown_disc_key(capsys):
    code, _, err = run(["det", "--set", "disc.bogus=1"], capsys)
    assert code == 2 and "bogus" in err


def test_symmetry_check_passes(capsys):
    code, out, _ = run(["pde-check", "--identity", "symmetry", "--h=-0.5,0.3", "--gamma", "0,0.3",
                        "--tau", "1,2"], capsys)
    rep = json.loads(out)
    assert code == 0
    ids = {r["name"]: r for r in rep["results"]["identities"]}
    assert ids["symmetry"]["residual"] < 1e-8
    assert rep["results"]["informational"] == ["symmetry (printed orientation)"]


def test_bad_subset(capsys):
    code, _, err = run(["pde-check", "--identity", "nls", "--subset", "3"], capsys)
    assert code == 2 and "subset" in err


def test_config_file_and_line_diagnostics(tmp_path, capsys):
    good = tmp_path / "run.cfg"
    good.write_text("# two-point run\nmodel = kpz\nh = -0.5, 0.3\ngamma = 0, 0.3\ntau = 1, 2\n"
                    "disc.step = 0.1\n")
    code, out, _ = run(["det", "--config", str(good)], capsys)
    assert code == 0
    assert json.loads(out)["inputs"]["h"] == [-0.5, 0.3]
    bad = tmp_path / "bad.cfg"
    bad.write_text("h = 0\nthis line is wrong\n")
    code, _, err = run(["det", "--config", str(bad)], capsys)
    assert code == 2 and "bad.cfg:2" in err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("h = 0.5\n")
    code, out, _ = run(["det", "--config", str(cfg), "--h", "1.5"], capsys)
    assert json.loads(out)["inputs"]["h"] == [1.5]


def test_reports_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["moments", "--h=-0.5,0.3", "--gamma", "0,0.3", "--tau", "1,2"]
    run(argv + ["--out", str(a)], capsys)
    run(argv + ["--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_suite_report_roundtrip(capsys):
    code, out, err = run(["suite", "--criteria", "2"], capsys)
    assert code == 0
    assert "criterion 2: PASS" in err
    rep = json.loads(out)
    assert cli.dumps_report(rep) == out


def test_unknown_criterion(capsys):
    code, _, err = run(["suite", "--criteria", "12"], capsys)
    assert code == 2 and "criteria" in err


def test_tw_csv(tmp_path, capsys):
    path = tmp_path / "tw.csv"
    code, _, _ = run(["tw", "--s=-2,0,2", "--csv", str(path)], capsys)
    lines = path.read_text().splitlines()
    assert code == 0
    assert lines[0] == "s,F2,u,dlogF2" and len(lines) == 4


def test_dist_two_point(capsys):
    code, out, _ = run(["dist", "--h=-0.5,0.5", "--gamma", "0,0.3", "--tau", "1,2",
                        "--zeta-nodes", "16"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert 0 < rep["results"]["distribution"] < 1


def test_dist_periodic(capsys):
    code, out, _ = run(["dist", "--model", "periodic", "--h", "0.2", "--gamma", "0.3", "--tau", "1"],
                       capsys)
    assert code == 0 and "D" in json.loads(out)["results"]


def test_bad_thread_count(monkeypatch, capsys):
    monkeypatch.setenv("KPZCUBIC_THREADS", "zero")
    code, _, err = run(["dist", "--h", "0", "--gamma", "0", "--tau", "1"], capsys)
    assert code == 2 and "KPZCUBIC_THREADS" in err


def test_scan_decay(tmp_path, capsys):
    path = tmp_path / "scan.csv"
    code, out, _ = run(["scan-decay", "--xi", "0,1,2,3", "--csv", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["results"]["slope"] < -0.1
    assert len(path.read_text().splitlines()) == 5


def test_numerical_failure_exit_one(monkeypatch, capsys):
    from kpzcubic.fredholm import SingularOperatorError

    def boom(*a, **k):
        raise SingularOperatorError("operator at kernel of I - H")

    monkeypatch.setattr(cli, "moments", boom)
    code, out, err = run(["det"], capsys)
    assert code == 1
    assert json.loads(out)["kind"] == "numerical"
    assert "numerical failure" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "kpzcubic", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
