import json
import subprocess
import sys

import numpy as np
import pytest

from yledge.cli import parse_range, run
from yledge.output import read_csv_table, strip_timestamp


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_basis_json(capsys):
    code, out, _ = _run(capsys, "basis", "--n", "4", "--bc", "periodic")
    assert code == 0
    d = json.loads(out)
    assert d["dim"] == 7 and d["n"] == 4 and sum(s["dim"] for s in d["sectors"]) == 7


def test_spectrum_at_exceptional_point(capsys):
    code, out, _ = _run(capsys, "spectrum", "--n", "8", "--g", "1", "--m", "0")
    assert code == 0
    rows = [ln.split(",") for ln in out.splitlines() if not ln.startswith("#")][1:]
    assert len(rows) == 47
    assert max(abs(complex(float(r[1]), float(r[2]))) for r in rows) < 1e-8


def test_usage_errors_exit_2(capsys):
    assert _run(capsys, "spectrum", "--n", "8", "--bogus")[0] == 2
    assert _run(capsys, "frobnicate")[0] == 2
    assert _run(capsys, "entropy", "--n", "8", "--m-range", "a:b")[0] == 2
    assert _run(capsys, "reproduce", "fig99")[0] == 2
    code, _, err = _run(capsys, "basis", "--n", "4", "--jobs", "0")
    assert code == 2 and "jobs" in err


def test_computational_errors_exit_1(capsys):
    code, _, err = _run(capsys, "echo", "--kind", "biortho", "--g", "1.5", "--mi", "0", "--dm", "0.1", "--n", "8")
    assert code == 1 and err.startswith("error:") and len(err.strip().splitlines()) == 1
    code, _, err = _run(capsys, "fit", "--family", "power", "--in", "/nonexistent.csv")
    assert code == 1


def test_negative_ranges_and_provenance(capsys):
    code, out, _ = _run(capsys, "entropy", "--g", "0.1", "--m-range", "-0.8:-0.6:0.1", "--n", "8")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# yledge_version:")
    assert any(ln.startswith("# params:") and '"g": 0.1' in ln for ln in lines)
    assert any(ln.startswith("# timestamp:") for ln in lines)
    assert len([ln for ln in lines if not ln.startswith("#")]) == 4


def test_parse_range():
    assert np.allclose(parse_range("-1:-0.5:0.25"), [-1, -0.75, -0.5])
    assert np.allclose(parse_range("0.3"), [0.3])
    assert len(parse_range("0:1:0.1")) == 11


def test_output_is_deterministic_and_cache_transparent(capsys, tmp_path):
    argv = ["rate-scan", "--g", "0.1", "--m-range", "-0.7:-0.6:0.05", "--n", "8"]
    plain = strip_timestamp(_run(capsys, *argv)[1])
    again = strip_timestamp(_run(capsys, *argv)[1])
    cold = strip_timestamp(_run(capsys, *argv, "--cache-dir", str(tmp_path))[1])
    warm = strip_timestamp(_run(capsys, *argv, "--cache-dir", str(tmp_path))[1])
    assert plain == again
    assert cold == warm
    table = lambda s: [ln for ln in s.splitlines() if not ln.startswith("#")]  # noqa: E731
    assert table(plain) == table(cold)


def test_env_var_enables_cache(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("YLEDGE_CACHE", str(tmp_path))
    assert _run(capsys, "spectrum", "--n", "6", "--g", "0.3", "--m", "0.1")[0] == 0
    assert any(p.is_file() for p in tmp_path.rglob("*"))


def test_parallel_jobs_match_serial(capsys):
    argv = ["fidelity", "--kind", "rl", "--g", "0.5", "--m-range", "-0.7:-0.5:0.1", "--n", "8"]
    serial = strip_timestamp(_run(capsys, *argv)[1])
    parallel = strip_timestamp(_run(capsys, *argv, "--jobs", "2")[1])
    assert serial == parallel


def test_hamiltonian_file_and_fit_round_trip(capsys, tmp_path):
    out = tmp_path / "h.txt"
    assert _run(capsys, "hamiltonian", "--n", "6", "--g", "0.5", "--m", "0.2", "--k", "0", "--out", str(out))[0] == 0
    from yledge.hamiltonian import read_sparse_text
    with open(out) as fh:
        assert read_sparse_text(fh).shape == (5, 5)  # orbits of 0, 1, 2 (two), 3 excitations
    data = tmp_path / "d.csv"
    x = np.array([8, 10, 12, 14.0])
    data.write_text("# synthetic\nN,y\n" + "".join(f"{a},{2 * a ** 1.25}\n" for a in x))
    code, text, _ = _run(capsys, "fit", "--family", "power", "--in", str(data))
    assert code == 0 and json.loads(text)["fit"]["exponent"] == pytest.approx(1.25, abs=1e-10)


def test_correlation_echo_and_phase_diagram(capsys, tmp_path):
    code, out, _ = _run(capsys, "correlation", "--g", "0.1", "--m", "5", "--n", "8", "--t-max", "2", "--dt", "1")
    assert code == 0 and out.splitlines()[4] == "l,t,G"
    code, out, _ = _run(capsys, "echo", "--kind", "assoc", "--g", "1.5", "--mi", "2.3", "--dm", "1e-4",
                        "--n", "8", "--t-max", "5", "--json")
    assert code == 0 and json.loads(out)["columns"] == ["t", "re", "im", "ln_abs"]
    pd = tmp_path / "pd.json"
    code, _, _ = _run(capsys, "phase-diagram", "--g-range", "1.5", "--m-range", "-3:3:1", "--n", "8",
                      "--out", str(pd))
    d = json.loads(pd.read_text())
    assert code == 0 and [p["label"] for p in d["points"]][0] == "PT_deconfined"
    assert {"g", "m", "label", "max_imag", "gap"} <= set(d["points"][0])


def test_reproduce_writes_datasets(capsys, tmp_path):
    code, out, _ = _run(capsys, "reproduce", "fig5", "--sizes", "8", "--out", str(tmp_path))
    assert code == 0
    files = json.loads(out)["files"]
    assert "fits.json" in files and (tmp_path / "spectrum_scan.csv").exists()
    fits = json.loads((tmp_path / "fits.json").read_text())["fits"]
    assert fits["m_c1"] < fits["m_c2"] < 0 < fits["m_c4"]
    header, table = read_csv_table(tmp_path / "ground_energy.csv")
    assert header == ["m", "re_E0"] and table.shape[1] == 2
    assert _run(capsys, "reproduce", "fig3", "--sizes", "8,22", "--out", str(tmp_path))[0] == 1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "yledge.cli", "basis", "--n", "5"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["dim"] == 11
