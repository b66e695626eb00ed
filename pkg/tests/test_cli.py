import json
import subprocess
import sys

import pytest

from condlab.cli import main


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_instance_bucket_sizes(capsys):
    code, out, _ = call(capsys, "gen-instance", "--mode", "lab", "--n", "1048576", "--kappa", "4",
                        "--rho", "8", "--tau", "4", "--label", "NO", "--seed", "1")
    body = json.loads(out)
    assert code == 0
    assert body["bucket_sizes"] == [128, 1024, 8192, 65536]
    assert body["tv_exact"] == "1/4"
    assert body["schema_version"] == 1
    assert "sealed" not in body


def test_gen_instance_csv_and_uniblock(capsys):
    code, out, _ = call(capsys, "gen-instance", "--n", "4096", "--kappa", "1", "--rho", "4",
                        "--tau", "3", "--seed", "2", "--out", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("bucket,size") and len(lines) == 4
    code, out, _ = call(capsys, "gen-instance", "--n", "65536", "--parity", "odd", "--kappa", "2",
                        "--seed", "2")
    assert json.loads(out)["support_size"] == 32


def test_verify_tv_quarter(capsys):
    code, out, _ = call(capsys, "verify", "tv-quarter", "--seed", "7", "--trials", "1000")
    body = json.loads(out)
    assert code == 0 and body["pass"]
    assert body["reports"][0]["estimate"] == "1000/1000 equal 1/4"


def test_verify_failure_exit_code(capsys):
    # with 7 probes no frequency lies within 0.015 of 1/2
    code, out, _ = call(capsys, "verify", "pair-probe", "--seed", "1", "--trials", "7")
    assert code == 1 and not json.loads(out)["pass"]


@pytest.mark.parametrize("argv", [
    ["gen-instance", "--bogus"],
    ["verify", "no-such-suite", "--seed", "1"],
    ["verify", "tv-quarter"],
    ["gen-instance", "--mode", "paper", "--n", "256", "--seed", "1"],
    ["run-tester", "--tester", "oracle-peeker", "--seed", "1"],
    ["verify", "tv-quarter", "--seed", "1", "--trials", "0"],
])
def test_usage_errors(capsys, argv):
    assert call(capsys, *argv)[0] == 2


def test_run_tester_reveal(capsys):
    argv = ["run-tester", "--tester", "uniform-fresh:k=8", "--q", "2", "--seed", "3",
            "--n", "4096", "--kappa", "1", "--rho", "4", "--tau", "3"]
    _, plain, _ = call(capsys, *argv)
    _, revealed, _ = call(capsys, *argv, "--reveal")
    assert "sealed" not in json.loads(plain)["runs"][0]
    assert len(json.loads(revealed)["runs"][0]["sealed"]["samples"]) == 2


def test_distinguish_csv(capsys):
    code, out, _ = call(capsys, "distinguish", "--seed", "4", "--trials", "3", "--out", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 7
    assert lines[0] == "trial,label,verdict,queries,probe_set_size,found,pairs_used"


def test_compare_oracles_reports_se(capsys):
    code, out, _ = call(capsys, "compare-oracles", "--seed", "2", "--trials", "20", "--q", "2",
                        "--gamma", "64", "--alpha", "2", "--phi", "5")
    body = json.loads(out)
    assert {"level", "tv", "se", "bound"} <= set(body["levels"][0])
    assert body["seed"] == 2 and body["trials"] == 20


def test_byte_identical_across_processes_and_jobs():
    argv = [sys.executable, "-m", "condlab.cli", "verify", "restricted", "--seed", "5",
            "--trials", "8"]
    a = subprocess.run(argv, capture_output=True, check=False).stdout
    b = subprocess.run(argv, capture_output=True, check=False).stdout
    c = subprocess.run(argv + ["--jobs", "2"], capture_output=True, check=False).stdout
    assert a and a == b == c
