import subprocess
import sys

import pytest

from eigengap_ae.cli import build_parser, main, read_config, ConfigError

SUBCOMMANDS = ["estimate", "verify", "sweep", "invariance", "audit"]


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimate_golden_row(capsys):
    code, out, _ = run(capsys, "estimate", "--protocol", "glsae", "--a", "0.5", "--epsilon", "1e-3", "--seed", "7")
    assert code == 0
    row = out.strip().split(",")
    assert row[0] == "glsae" and len(row) == 14
    assert abs(float(row[2]) - 0.5) <= 1e-3


def test_estimate_header(capsys):
    code, out, _ = run(capsys, "estimate", "--protocol", "gmmae", "--a", "0.3", "--epsilon", "0.05", "--header")
    assert code == 0
    assert out.splitlines()[0].startswith("protocol,a_true,a_hat,theta_hat")


@pytest.mark.parametrize("argv,flag", [
    (["--a", "1.5", "--epsilon", "1e-3", "--protocol", "glsae"], "--a"),
    (["--a", "0.5", "--epsilon", "0", "--protocol", "glsae"], "--epsilon"),
    (["--a", "0.5", "--epsilon", "0.1", "--protocol", "glsae", "--p-flip", "0.9"], "--p-flip"),
    (["--a", "0.5", "--epsilon", "0.1", "--protocol", "glsae", "--rho", "2"], "--rho"),
    (["--epsilon", "0.1", "--protocol", "glsae"], "--a"),
    (["--a", "0.5", "--epsilon", "0.1", "--protocol", "qpe"], "--protocol"),
    (["--a", "0.5", "--epsilon", "0.1", "--protocol", "glsae", "--bogus", "1"], "--bogus"),
])
def test_estimate_usage_errors(capsys, argv, flag):
    code, _, err = run(capsys, "estimate", *argv)
    assert code == 2
    assert flag in err


def test_estimate_gdmae_depth(capsys):
    code, out, _ = run(capsys, "estimate", "--protocol", "gdmae", "--a", "0.001", "--epsilon", "1e-2", "--T", "8")
    assert code == 0
    row = out.strip().split(",")
    assert int(row[7]) == 32 and int(row[9]) <= 32


def test_stdout_byte_identical(capsys):
    argv = ["estimate", "--protocol", "gdmae", "--a", "0.2", "--epsilon", "0.02", "--seed", "3"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--dims", "2,4,8,16", "--seeds", "5")
    assert code == 0 and "PASS" in out


def test_verify_cap(capsys):
    code, _, err = run(capsys, "verify", "--dims", "128")
    assert code == 2 and "--dims" in err


def test_verify_t0(capsys):
    code, out, _ = run(capsys, "verify", "--t-max", "0")
    assert code == 0


def test_sweep_malformed_plan(capsys, tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text("trials = 10\n# comment\nepsilons 0.1\n")
    code, _, err = run(capsys, "sweep", "--plan", str(plan))
    assert code == 2
    assert f"{plan}:3" in err


def test_sweep_plan_unknown_key(capsys, tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text("colour = blue\n")
    code, _, err = run(capsys, "sweep", "--plan", str(plan))
    assert code == 2 and f"{plan}:1" in err and "colour" in err


def test_sweep_plan_and_flag_precedence(capsys, tmp_path):
    plan = tmp_path / "plan.txt"
    out = tmp_path / "sweep.csv"
    plan.write_text(f"epsilons = 0.1,0.05\ntrials = 10\na = 0.4\noutput = {out}\njobs = 1\n")
    code, stdout, _ = run(capsys, "sweep", "--plan", str(plan), "--a", "0.2")
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 21
    assert all(l.split(",")[1] == "0.2" for l in lines[1:])
    assert "depth slope" in stdout


def test_sweep_env_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("EIGENGAP_AE_OUTPUT", str(tmp_path / "env"))
    code, _, _ = run(capsys, "sweep", "--epsilons", "0.1", "--trials", "10", "--jobs", "1",
                     "--plot-data", str(tmp_path / "plot"))
    assert code == 0
    assert (tmp_path / "env" / "sweep.csv").exists()
    assert (tmp_path / "plot" / "glsae_a0.3_depth.dat").exists()


def test_sweep_bad_epsilons(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "--epsilons", "0.01,0.1", "--output", str(tmp_path / "x.csv"))
    assert code == 2 and "decreasing" in err


def test_sweep_io_failure(capsys, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code, _, err = run(capsys, "sweep", "--epsilons", "0.1", "--trials", "10", "--jobs", "1",
                       "--output", str(blocker / "s.csv"))
    assert code == 1 and str(blocker) in err


def test_invariance(capsys, tmp_path):
    code, out, _ = run(capsys, "invariance", "--budget", "1e5", "--splits", "3", "--a", "0.25", "--trials", "10",
                       "--jobs", "1", "--output", str(tmp_path / "inv.csv"))
    assert code == 0
    assert "max/min rmse ratio" in out
    assert len((tmp_path / "inv.csv").read_text().splitlines()) == 4


def test_invariance_bad_split(capsys, tmp_path):
    code, _, err = run(capsys, "invariance", "--budget", "1e6", "--split", "10:10", "--output", str(tmp_path / "i.csv"))
    assert code == 2 and "budget" in err


def test_audit(capsys):
    code, out, _ = run(capsys, "audit")
    assert code == 0
    assert "PASS convex_phi" in out
    assert "FAIL (info) truncation_literal" in out
    assert out.strip().endswith("audit PASS")


def test_config_file_for_estimate(capsys, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("protocol = glsae\na = 0.25\nepsilon = 0.05\np-flip = 0\nheader = true\n")
    code, out, _ = run(capsys, "estimate", "--config", str(cfg), "--seed", "5")
    assert code == 0 and out.count("\n") == 2


def test_read_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        read_config(tmp_path / "missing")
    p = tmp_path / "x"
    p.write_text("= 3\n")
    with pytest.raises(ConfigError, match=":1:"):
        read_config(p)


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_defaults(sub):
    parser = build_parser()
    subparser = parser._subparsers._group_actions[0].choices[sub]
    text = subparser.format_help()
    for action in subparser._actions:
        if action.option_strings and action.dest != "help":
            assert action.option_strings[-1] in text or action.option_strings[0] in text
    assert "default" in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "eigengap_ae", "verify", "--dims", "4", "--seeds", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout
