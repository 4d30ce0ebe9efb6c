import json
import subprocess
import sys

import numpy as np
import pytest

from corespec import cli
from corespec.constants import HARTREE_TO_EV


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(args):
    return cli.main([str(a) for a in args])


HUBBARD_FCI = "[run]\nintegrals = fixture:hubbard_dimer\nmethod = fci\n"
HUBBARD_QPE = "[run]\nintegrals = fixture:hubbard_dimer\nmethod = qpe\n[qpe]\nshots = 400\n"


def test_fci_run_reports_analytic_ionization_pole(tmp_path):
    cfg = _write(tmp_path, "a.ini", HUBBARD_FCI)
    assert _run(["run", "--config", cfg, "--out", tmp_path / "out"]) == 0
    peaks = json.loads((tmp_path / "out" / "peaks.json").read_text())
    assert peaks["columns"] == ["energy_eV", "weight"]
    (row,) = peaks["peaks"]
    # E0 = 2 - 2 sqrt(2); the ion has one electron in the bonding orbital at -t
    assert row["energy_eV"] == pytest.approx((2 - 2 * np.sqrt(2) + 1) * HARTREE_TO_EV, abs=1e-9)
    assert row["weight"] == pytest.approx(0.5 + 1 / (2 * np.sqrt(2)), abs=1e-12)
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["schema_version"] == 1 and manifest["version"]
    assert "method = fci" in manifest["config"] and "[qpe]" in manifest["config"]
    tsv = (tmp_path / "out" / "spectrum.tsv").read_text().splitlines()
    assert tsv[0].startswith("#") and len(tsv[-1].split("\t")) == 2


def test_qpe_runs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, "q.ini", HUBBARD_QPE)
    for d in ("a", "b"):
        assert _run(["run", "--config", cfg, "--out", tmp_path / d, "--seed", 17]) == 0
    for name in ("peaks.json", "spectrum.json", "spectrum.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert _run(["run", "--config", cfg, "--out", tmp_path / "c", "--seed", 18]) == 0
    assert (tmp_path / "a" / "spectrum.json").read_bytes() != (tmp_path / "c" / "spectrum.json").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert "seed = 17" in manifest["config"]
    assert manifest["derived"]["window"]["bits"] == 12


def test_rerun_from_manifest_reproduces_artifacts(tmp_path):
    cfg = _write(tmp_path, "q.ini", HUBBARD_QPE)
    assert _run(["run", "--config", cfg, "--out", tmp_path / "a"]) == 0
    assert _run(["run", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b"]) == 0
    for name in ("peaks.json", "spectrum.json", "spectrum.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    assert ma == mb


def test_fcidump_file_path_is_relative_to_config(tmp_path):
    from corespec.fixtures import two_orbital
    from corespec.integrals import write_fcidump

    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "two.fcidump").write_text(write_fcidump(two_orbital()))
    cfg = _write(tmp_path, "t.ini", "[run]\nintegrals = data/two.fcidump\nmethod = ci\nrank = 2\n")
    assert _run(["run", "--config", cfg, "--out", tmp_path / "o"]) == 0
    peaks = json.loads((tmp_path / "o" / "peaks.json").read_text())["peaks"]
    assert len(peaks) == 1


@pytest.mark.parametrize("text", [
    "[run]\nmethod = fci\n",
    "[run]\nintegrals = fixture:hubbard_dimer\nmethod = magic\n",
    "[run]\nintegrals = fixture:hubbard_dimer\nmethod = ci\n",
    "[run]\nintegrals = fixture:hubbard_dimer\n[spectrum]\nbroadening = -1\n",
    "[run]\nintegrals = fixture:hubbard_dimer\n[qpe]\nshots = many\n",
    "[run]\nintegrals = fixture:hubbard_dimer\n[extra]\nx = 1\n",
    "[run]\nintegrals = fixture:hubbard_dimer\ncolour = red\n",
    "[run]\nintegrals = fixture:nope\n",
    "[run]\nintegrals = fixture:hubbard_dimer\nmethod = rtcc\n[trial]\nexcite_from = 0\nexcite_to = 1\n",
    "not an ini file",
])
def test_configuration_errors_exit_2(tmp_path, text):
    cfg = _write(tmp_path, "bad.ini", text)
    assert _run(["run", "--config", cfg, "--out", tmp_path / "o"]) == 2


def test_missing_files_exit_4(tmp_path):
    assert _run(["run", "--config", tmp_path / "absent.ini"]) == 4
    cfg = _write(tmp_path, "m.ini", "[run]\nintegrals = nowhere.fcidump\n")
    assert _run(["run", "--config", cfg, "--out", tmp_path / "o"]) == 4
    _write(tmp_path, "broken.fcidump", "&FCI NORB=1 &END\n1 2 3\n")
    cfg = _write(tmp_path, "b.ini", "[run]\nintegrals = broken.fcidump\n")
    assert _run(["run", "--config", cfg, "--out", tmp_path / "o"]) == 4


def test_numerical_failure_exits_3(tmp_path, monkeypatch):
    from corespec.ci_solver import ConvergenceError

    def boom(*args, **kwargs):
        raise ConvergenceError("no convergence", -1.0)

    monkeypatch.setattr(cli, "ground_state", boom)
    cfg = _write(tmp_path, "a.ini", HUBBARD_FCI)
    assert _run(["run", "--config", cfg, "--out", tmp_path / "o"]) == 3


def test_rtcc_run_on_small_fixture(tmp_path):
    cfg = _write(tmp_path, "r.ini", "[run]\nintegrals = fixture:two_orbital\nmethod = rtcc\n"
                 "[rtcc]\nt_max = 50\n")
    assert _run(["run", "--config", cfg, "--out", tmp_path / "r"]) == 0
    peaks = json.loads((tmp_path / "r" / "peaks.json").read_text())
    assert peaks["columns"] == ["energy_eV", "height", "weight"]
    assert peaks["peaks"]


def test_compare_self_and_symmetry(tmp_path):
    _write(tmp_path, "f.ini", HUBBARD_FCI)
    _write(tmp_path, "q.ini", HUBBARD_QPE)
    assert _run(["run", "--config", tmp_path / "f.ini", "--out", tmp_path / "f"]) == 0
    assert _run(["run", "--config", tmp_path / "q.ini", "--out", tmp_path / "q"]) == 0
    same = cli.compare([tmp_path / "f", tmp_path / "f"])
    (d,) = same["discrepancies"].values()
    assert d["max_abs_eV"] == 0.0
    ab = cli.compare([tmp_path / "f", tmp_path / "q"])
    ba = cli.compare([tmp_path / "q", tmp_path / "f"])
    assert list(ab["discrepancies"].values())[0]["max_abs_eV"] == pytest.approx(
        list(ba["discrepancies"].values())[0]["max_abs_eV"])
    def canon(rows):
        return sorted(json.dumps(r, sort_keys=True) for r in rows)

    assert canon(ab["rows"]) == canon(ba["rows"])


def test_compare_writes_overlay_with_shift_and_experiment(tmp_path):
    _write(tmp_path, "f.ini", HUBBARD_FCI)
    assert _run(["run", "--config", tmp_path / "f.ini", "--out", tmp_path / "f"]) == 0
    exp = np.column_stack([np.linspace(0, 20, 50), np.linspace(0, 1, 50)])
    np.savetxt(tmp_path / "exp.tsv", exp, delimiter="\t", header="omega\tA")
    code = _run(["compare", tmp_path / "f", tmp_path / "f", "--shift", 4.3, "--broaden", 1.0,
                 "--experiment", tmp_path / "exp.tsv", "--out", tmp_path / "cmp"])
    assert code == 0
    report = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert report["shift_eV"] == 4.3
    row = report["rows"][0]
    assert row["fci"]["energy_eV"] == pytest.approx((2 - 2 * np.sqrt(2) + 1) * HARTREE_TO_EV + 4.3)
    overlay = np.loadtxt(tmp_path / "cmp" / "overlay.tsv", comments="#")
    assert overlay.shape[1] == 4
    header = (tmp_path / "cmp" / "overlay.tsv").read_text().splitlines()[0]
    assert "experiment" in header


def test_compare_refuses_different_integrals(tmp_path):
    _write(tmp_path, "f.ini", HUBBARD_FCI)
    _write(tmp_path, "g.ini", "[run]\nintegrals = fixture:two_orbital\nmethod = fci\n")
    assert _run(["run", "--config", tmp_path / "f.ini", "--out", tmp_path / "f"]) == 0
    assert _run(["run", "--config", tmp_path / "g.ini", "--out", tmp_path / "g"]) == 0
    assert _run(["compare", tmp_path / "f", tmp_path / "g"]) == 2
    assert _run(["compare", tmp_path / "f", tmp_path / "g", "--force"]) == 0
    assert _run(["compare", tmp_path / "f"]) == 2
    assert _run(["compare", tmp_path / "f", tmp_path / "nothing"]) == 4


def test_match_peaks_is_greedy_by_distance():
    a = [{"energy_eV": 0.0}, {"energy_eV": 1.0}]
    b = [{"energy_eV": 0.9}, {"energy_eV": 0.2}, {"energy_eV": 5.0}]
    assert cli.match_peaks(a, b, tol=1.0) == [(0, 1), (1, 0)]


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, "a.ini", HUBBARD_FCI)
    out = subprocess.run([sys.executable, "-m", "corespec", "run", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    bad = subprocess.run([sys.executable, "-m", "corespec", "frobnicate"], capture_output=True)
    assert bad.returncode == 2
