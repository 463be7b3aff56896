import json
import subprocess
import sys

import pytest

from nogold.bounds import clear_caches
from nogold.cli import dumps, main

EXAMPLE = ["--k00", "210", "--k01", "20", "--k10", "4", "--k11", "22"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_text_report(capsys):
    code, out, _ = run(capsys, "bound", *EXAMPLE, "--prevalence-max", "0.15")
    assert code == 0
    assert "pi1 (Se2 - Se1) >= 0.0290" in out
    assert "Se1 <= 0.8304" in out
    assert "given pi1 <= 0.15" in out


def test_bound_json_round_trips_and_matches_text(capsys):
    code, out, _ = run(capsys, "bound", *EXAMPLE, "--prevalence-max", "0.15", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert dumps(doc) + "\n" == out
    assert doc["display"]["gain_product_lower"] <= doc["gain_product_lower"]
    assert doc["display"]["se1_upper"] >= doc["se1_upper"]
    _, text, _ = run(capsys, "bound", *EXAMPLE, "--prevalence-max", "0.15")
    for key in ("gain_product_lower", "gain_lower_at_cap", "se1_upper", "se1_lower_implied"):
        assert f"{doc['display'][key]:.4f}" in text


@pytest.mark.parametrize("content", [
    '{"k00": 210, "k01": 20, "k10": 4, "k11": 22}',
    "k00,k01,k10,k11\n210,20,4,22\n",
    "210,20,4,22\n",
])
def test_bound_from_file(tmp_path, capsys, content):
    path = tmp_path / "table.txt"
    path.write_text(content)
    code, out, _ = run(capsys, "bound", "--input", str(path))
    assert code == 0 and "Se1 <= 0.8304" in out


@pytest.mark.parametrize("argv, field", [
    (["--k00", "210", "--k01", "20", "--k10", "4"], "k11"),
    ([*EXAMPLE, "--beta", "1.5"], "beta"),
    ([*EXAMPLE, "--prevalence-max", "0"], "prevalence"),
])
def test_bound_validation_errors(capsys, argv, field):
    code, _, err = run(capsys, "bound", *argv)
    assert code == 2 and field in err


def test_bad_file_field_is_named(tmp_path, capsys):
    path = tmp_path / "t.json"
    path.write_text('{"k00": 1, "k01": "x", "k10": 0, "k11": 0}')
    code, _, err = run(capsys, "bound", "--input", str(path))
    assert code == 2 and "k01" in err


def test_direct_ratio_flag(capsys):
    code, out, _ = run(capsys, "bound", "--k00", "3", "--k01", "5", "--k10", "0", "--k11", "1",
                       "--beta", "0.8", "--direct-ratio", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["se1_upper_direct"] <= doc["se1_upper"]


def test_feasible_extremes_e_le(capsys):
    code, out, _ = run(capsys, "feasible", "--from-counts", "210,20,4,22", "--set", "E_le", "--extremes")
    assert code == 0 and "0.6190" in out and "0.6191" in out
    code, out, _ = run(capsys, "feasible", "--from-counts", "210,20,4,22", "--set", "E_le",
                       "--extremes", "--format", "json")
    assert json.loads(out)["se1_upper_from_q"] == pytest.approx(26 / 42)


def test_feasible_membership(capsys):
    code, out, _ = run(capsys, "feasible", "--from-counts", "210,20,4,22", "--set", "C_le",
                       "--point", f"1,{16 / 256}")
    assert code == 0 and out.startswith("member of C_le")
    code, out, _ = run(capsys, "feasible", "--q00", "0.4", "--q01", "0.3", "--q10", "0.2", "--q11", "0.1",
                       "--set", "C_le", "--point", "1,0.05", "--format", "json")
    assert code == 0 and json.loads(out)["member"] is False


def test_feasible_rejects_off_simplex(capsys):
    code, _, err = run(capsys, "feasible", "--q00", "0.5", "--q01", "0.5", "--q10", "0.5", "--q11", "0",
                       "--set", "A", "--extremes", "--pr", "0.5")
    assert code == 2 and "q" in err


def test_feasible_extremes_need_prevalence(capsys):
    code, _, err = run(capsys, "feasible", "--from-counts", "210,20,4,22", "--set", "C", "--extremes")
    assert code == 2 and "--pr" in err


def test_coverage_exact_and_budget(capsys):
    code, out, _ = run(capsys, "coverage", "--n", "6", "--beta", "0.8", "--grid", "21")
    assert code == 0 and out.rstrip().endswith("PASS")
    code, _, err = run(capsys, "coverage", "--n", "100")
    assert code == 3


def test_coverage_monte_carlo(capsys):
    code, out, _ = run(capsys, "coverage", "--n", "8", "--beta", "0.9", "--reps", "40", "--seed", "1",
                       "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["mode"] == "monte_carlo" and doc["passed"]


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--seed", "7", "--samples", "10000")
    assert code == 0 and out.rstrip().endswith("PASS")
    code, out, _ = run(capsys, "oracle", "--samples", "0", "--format", "json")
    assert code == 0 and json.loads(out)["skipped"] is True


def test_thread_setting_does_not_change_results(monkeypatch, capsys):
    clear_caches()
    _, single, _ = run(capsys, "coverage", "--n", "4", "--beta", "0.8", "--format", "json")
    clear_caches()
    monkeypatch.setenv("NOGOLD_THREADS", "3")
    _, threaded, _ = run(capsys, "coverage", "--n", "4", "--beta", "0.8", "--format", "json")
    assert single == threaded


def test_version_and_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nogold.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "nogold-buehler/1" in proc.stdout and "wald-cc-lower/1" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "nogold.cli", "bound", "--k00", "x"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
