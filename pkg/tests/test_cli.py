import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from denaturefit import io as dio
from denaturefit.cli import main
from denaturefit.model import LemForm, model_signal
from denaturefit.synth import SyntheticSpec

from geometry import max_separation


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    assert main(["synth-grid", "--outdir", str(out), "--seed", "1"]) == 0
    return out


@pytest.fixture(scope="module")
def std_csv(grid):
    return grid / "std_m6_d50_4.csv"


def test_grid_files(grid):
    files = sorted(grid.glob("*.csv"))
    assert len(files) == 9
    for f in files:
        assert len(_rows(f)) == 60
        truth = json.loads(f.with_suffix(".truth.json").read_text())
        assert truth["schema_version"] == 1 and truth["seed"] == 1


def test_grid_byte_identical(grid, tmp_path):
    assert main(["synth-grid", "--outdir", str(tmp_path), "--seed", "1"]) == 0
    for f in grid.glob("*"):
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_synth_noiseless(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["synth", "--out", str(out), "--sigma", "0"]) == 0
    data = dio.read_dataset(out)
    np.testing.assert_array_equal(data.signal, model_signal(SyntheticSpec().truth(), data.d))


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("DENATUREFIT_SEED", "7")
    assert main(["synth", "--out", str(tmp_path / "env.csv")]) == 0
    assert main(["synth", "--out", str(tmp_path / "flag.csv"), "--seed", "7"]) == 0
    assert (tmp_path / "env.csv").read_bytes() == (tmp_path / "flag.csv").read_bytes()
    monkeypatch.setenv("DENATUREFIT_SEED", "seven")
    assert main(["synth", "--out", str(tmp_path / "bad.csv")]) == 1


def test_fit_report(std_csv, tmp_path, capsys):
    out = tmp_path / "fit.json"
    assert main(["fit", str(std_csv), "--form", "m-d50", "--out", str(out)]) == 0
    assert "D50=" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    for key in ("params", "triple", "sse", "s2", "dof", "covariance", "correlation", "intervals"):
        assert key in doc
    assert {iv["level"] for iv in doc["intervals"]} == {0.683, 0.95}
    d50_95 = next(iv for iv in doc["intervals"] if iv["param"] == "d50" and iv["level"] == 0.95)
    assert d50_95["lower"] <= 4.0 <= d50_95["upper"]


def test_fit_forms_agree(std_csv, capsys):
    triples = []
    for form in LemForm:
        assert main(["fit", str(std_csv), "--form", form.value, "--json"]) == 0
        triples.append(json.loads(capsys.readouterr().out)["triple"])
    for t in triples[1:]:
        for k in ("dg0", "m", "d50"):
            assert t[k] == pytest.approx(triples[0][k], rel=1e-4)


def test_fit_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", str(empty)]) == 2
    flat = tmp_path / "flat.csv"
    flat.write_text("denaturant,signal\n" + "".join(f"{i * 0.5},300\n" for i in range(20)))
    assert main(["fit", str(flat)]) == 2
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2


def test_fit_nonconvergence_exit_code(std_csv, tmp_path, monkeypatch):
    import denaturefit.cli as cli
    from denaturefit.lm import LmOptions, lm_fit
    from denaturefit.model import initial_guess

    def starved(data, form, c):
        return lm_fit(data, initial_guess(data, form, c), form, c, LmOptions(max_iter=1))
    monkeypatch.setattr(cli, "fit_best", starved)
    out = tmp_path / "nc.json"
    assert main(["fit", str(std_csv), "--out", str(out)]) == 3
    doc = json.loads(out.read_text())
    assert doc["converged"] is False and "error" in doc


def test_ci_marginal_symmetric(std_csv, capsys):
    assert main(["ci", str(std_csv), "--method", "marginal"]) == 0
    doc = json.loads(capsys.readouterr().out)
    for iv in doc["intervals"]:
        assert iv["center"] - iv["lower"] == pytest.approx(iv["upper"] - iv["center"], rel=1e-9)


def test_ci_montecarlo_ensemble(std_csv, tmp_path):
    out = tmp_path / "ci.json"
    assert main(["ci", str(std_csv), "--method", "montecarlo", "--rounds", "500",
                 "--level", "0.68", "--out", str(out)]) == 0
    rows = _rows(tmp_path / "ci.ensemble.csv")
    assert len(rows) == 500
    doc = json.loads(out.read_text())
    assert doc["method"] == "mc" and len(doc["intervals"]) == 6


def test_ci_usage_errors(std_csv):
    with pytest.raises(SystemExit) as info:
        main(["ci", str(std_csv), "--method", "jackknife"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["ci", str(std_csv), "--level", "1.5"])
    assert info.value.code == 1


def test_profile_superimpose(std_csv, tmp_path):
    rep = tmp_path / "fit.json"
    assert main(["fit", str(std_csv), "--form", "dg0-m", "--out", str(rep)]) == 0
    fit = json.loads(rep.read_text())
    (c1, c2), (s1, s2) = ([fit["params"][k] for k in ("dg0", "m")],
                          [fit["stderr"][k] for k in ("dg0", "m")])
    a, b = tmp_path / "p1.csv", tmp_path / "p2.csv"
    assert main(["profile", str(std_csv), "--form", "dg0-m", "--param", "p1", "--lo", str(c1 - 2 * s1),
                 "--hi", str(c1 + 2 * s1), "--steps", "9", "--out", str(a)]) == 0
    assert main(["profile", str(std_csv), "--form", "dg0-m", "--param", "p2", "--lo", str(c2 - 2 * s2),
                 "--hi", str(c2 + 2 * s2), "--steps", "9", "--out", str(b)]) == 0
    ra, rb = _rows(a), _rows(b)
    assert list(ra[0]) == ["dg0", "m", "sse"] and list(rb[0]) == ["m", "dg0", "sse"]
    curves = [np.array([((float(r["dg0"]) - c1) / s1, (float(r["m"]) - c2) / s2) for r in rows])
              for rows in (ra, rb)]
    assert max_separation(*curves) < 0.05


def test_profile_two_steps(std_csv, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["profile", str(std_csv), "--form", "m-d50", "--param", "p2",
                 "--lo", "3.5", "--hi", "4.5", "--steps", "2", "--out", str(out)]) == 0
    from denaturefit.confidence import fit_best
    sse_min = fit_best(dio.read_dataset(std_csv), LemForm.M_D50).sse
    assert all(float(r["sse"]) > sse_min for r in _rows(out))


def test_profile_usage_errors(std_csv):
    for extra in (["--param", "p3", "--lo", "1", "--hi", "2"],
                  ["--param", "p1", "--lo", "1", "--hi", "2", "--steps", "1"]):
        with pytest.raises(SystemExit) as info:
            main(["profile", str(std_csv)] + extra)
        assert info.value.code == 1
    assert main(["profile", str(std_csv), "--param", "p1", "--lo", "2", "--hi", "1"]) == 1


def test_calibrate_smoke(tmp_path, capsys):
    prefix = tmp_path / "cal"
    assert main(["calibrate", "--method", "marginal", "--noise", "gaussian", "--level", "0.683",
                 "--trials", "100", "--seed", "1", "--out", str(prefix)]) == 0
    rows = _rows(f"{prefix}.csv")
    assert len(rows) == 6
    for r in rows:
        assert 0.50 <= float(r["fraction"]) <= 0.85
    doc = json.loads((tmp_path / "cal.json").read_text())
    assert doc["reports"][0]["n_trials"] == 100


def test_calibrate_invalid_level():
    with pytest.raises(SystemExit) as info:
        main(["calibrate", "--level", "1.5"])
    assert info.value.code == 1


def test_propagate_explicit(capsys):
    assert main(["propagate", "--x1", "6", "--sigma1", "0.3", "--x2", "4", "--sigma2", "0.04"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["terms"] == "two"
    assert doc["sigma"] == pytest.approx(np.sqrt(1.44 + 0.0576))
    assert main(["propagate", "--x1", "6"]) == 1


def test_propagate_from_fit_reports(std_csv, tmp_path, capsys):
    rep = tmp_path / "dg0m.json"
    direct = tmp_path / "md50.json"
    assert main(["fit", str(std_csv), "--form", "dg0-m", "--out", str(rep)]) == 0
    assert main(["fit", str(std_csv), "--form", "m-d50", "--out", str(direct)]) == 0
    capsys.readouterr()
    assert main(["propagate", "--fit-report", str(rep), "--direct-report", str(direct)]) == 0
    full = json.loads(capsys.readouterr().out)
    assert full["derived"] == "d50"
    assert 0.85 <= full["ratio"] <= 1.15
    assert main(["propagate", "--fit-report", str(rep), "--direct-report", str(direct), "--two-term"]) == 0
    two = json.loads(capsys.readouterr().out)
    assert two["ratio"] > 1.5 or two["ratio"] < 0.67


def test_plot_data_commands(std_csv, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["scatter", str(std_csv), "--rounds", "5", "--out", str(out)]) == 0
    assert len(_rows(out)) == 15
    out = tmp_path / "c.csv"
    assert main(["compare", str(std_csv), "--rounds", "60", "--out", str(out)]) == 0
    assert len(_rows(out)) == 24
    out = tmp_path / "r.csv"
    assert main(["propagate", "--data", str(std_csv), "--out", str(out)]) == 0
    assert len(_rows(out)) == 3


def test_module_entry_point(std_csv):
    proc = subprocess.run([sys.executable, "-m", "denaturefit", "fit", str(std_csv), "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kind"] == "fit"
    proc = subprocess.run([sys.executable, "-m", "denaturefit"], capture_output=True, text=True)
    assert proc.returncode == 1
