from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from localgme import io
from localgme.cli import main, parse_float_grid, parse_int_range, resolve_theta
from localgme.errors import ArgumentError
from localgme.gme import gme_score
from localgme.states import ghz_fidelity_formula


def run(tmp_path, *argv):
    return main([str(a) for a in argv])


def test_state_xmatrix_auto_theta(tmp_path):
    out = tmp_path / "x.json"
    assert run(tmp_path, "state", "xmatrix", "--n", 3, "--alpha", 0.99, "--theta", "auto", "--out", out) == 0
    doc = io.load(out)
    rho = io.state_from_dict(doc)
    assert gme_score(rho).score > 0
    meta = doc["metadata"]
    assert meta["version"] and meta["parameters"]["alpha"] == 0.99
    assert "tolerances" in meta


def test_state_family_hand_typed_quarter_pi(tmp_path):
    out = tmp_path / "f.json"
    assert run(tmp_path, "state", "family", "--alpha", 1, "--theta", 0.7854, "--out", out) == 0
    rho = io.state_from_dict(io.load(out))
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(rho.matrix, np.outer(phi, phi))


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "state", "family", "--alpha", 1.5) == 2
    assert run(tmp_path, "state", "family", "--alpha", 0.5, "--theta", "nope") == 2
    assert run(tmp_path, "--tol", "bogus=1", "state", "ghz", "--n", 3) == 2
    assert run(tmp_path, "--cap", 8, "state", "gme-qutrit", "--n", 3, "--alpha", 0.9) == 3
    assert run(tmp_path, "certify", tmp_path / "missing.json") == 2
    ghz4 = tmp_path / "g4.json"
    run(tmp_path, "state", "ghz", "--n", 4, "--out", ghz4)
    assert run(tmp_path, "certify", ghz4, "--mode", "gmnl") == 3
    with pytest.raises(SystemExit) as exc:
        main(["state", "unknown-kind"])
    assert exc.value.code == 2


def test_solver_error_exit_code(tmp_path, monkeypatch):
    from localgme import cli
    from localgme.errors import SolverError

    def boom(*a, **k):
        raise SolverError("forced")

    monkeypatch.setattr(cli, "certify", boom)
    st = tmp_path / "g.json"
    run(tmp_path, "state", "ghz", "--n", 2, "--out", st)
    assert run(tmp_path, "certify", st, "--mode", "local") == 4


def test_certify_modes(tmp_path):
    g3, g4, prod = tmp_path / "g3.json", tmp_path / "g4.json", tmp_path / "p.json"
    run(tmp_path, "state", "ghz", "--n", 3, "--out", g3)
    run(tmp_path, "state", "ghz", "--n", 4, "--out", g4)
    run(tmp_path, "state", "family", "--alpha", 1, "--theta", 0, "--out", prod)
    out = tmp_path / "c.json"
    assert run(tmp_path, "certify", g3, "--mode", "gmnl", "--settings", "svetlichny", "--out", out) == 0
    cert = io.load(out)["certificate"]
    assert cert["visibility"] == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert cert["svetlichny_value"] == pytest.approx(4 * np.sqrt(2))
    assert run(tmp_path, "certify", prod, "--mode", "local", "--out", out) == 0
    assert io.load(out)["certificate"]["visibility"] >= 1 - 1e-9
    assert run(tmp_path, "certify", g4, "--mode", "gme", "--out", out) == 0
    assert io.load(out)["certificate"]["score"] == pytest.approx(1)


def test_certify_behavior_file_and_settings_file(tmp_path):
    g2 = tmp_path / "g2.json"
    run(tmp_path, "state", "ghz", "--n", 2, "--out", g2)
    z, x = [0, 0, 1.0], [1.0, 0, 0]
    d = np.array([1.0, 0, 1.0]) / np.sqrt(2)
    e = np.array([-1.0, 0, 1.0]) / np.sqrt(2)
    settings = tmp_path / "m.json"
    settings.write_text(json.dumps({"bloch": [[z, x], [d.tolist(), e.tolist()]]}))
    out = tmp_path / "c.json"
    assert run(tmp_path, "certify", g2, "--mode", "local", "--settings", settings, "--out", out) == 0
    doc = io.load(out)
    assert doc["certificate"]["visibility"] == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    behavior = tmp_path / "b.json"
    io.dump(doc["behavior"], behavior)
    assert run(tmp_path, "certify", behavior, "--mode", "local", "--out", out) == 0
    assert io.load(out)["certificate"]["visibility"] == pytest.approx(1 / np.sqrt(2), abs=1e-6)


def test_filtered_state_file(tmp_path):
    out = tmp_path / "f.json"
    assert run(tmp_path, "state", "filtered", "--n", 3, "--alpha", 0.99, "--out", out) == 0
    doc = io.load(out)
    rho = io.state_from_dict(doc)
    assert rho.dims == (2, 2, 2)
    v = np.zeros(8)
    v[0] = v[-1] = 1 / np.sqrt(2)
    assert v @ rho.matrix.real @ v == pytest.approx(ghz_fidelity_formula(3, 0.99), abs=1e-12)
    c = tmp_path / "c.json"
    assert run(tmp_path, "certify", out, "--mode", "gmnl", "--settings", "optimized", "--out", c) == 0
    assert io.load(c)["certificate"]["svetlichny_value"] > 4


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_existence_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert run(tmp_path, "sweep", "--n", "2:6", "--out", out) == 0
    rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [2, 3, 4, 5, 6]
    assert all(float(r["C_analytic"]) > 0 and r["unsteerable"] == "1" for r in rows)
    assert io.load(str(out) + ".meta.json")["parameters"]["rows"] == 5


def test_sweep_fidelity_monotone_in_alpha(tmp_path):
    out = tmp_path / "s.csv"
    assert run(tmp_path, "sweep", "--n", "4", "--alpha", "0.6:1:9", "--workers", 3, "--out", out) == 0
    fid = [float(r["fidelity"]) for r in read_csv(out)]
    assert np.all(np.diff(fid) > 0)
    assert fid[-1] == pytest.approx(1)


def test_sweep_numeric_column_and_precision(tmp_path):
    out = tmp_path / "s.csv"
    assert run(tmp_path, "sweep", "--n", "3", "--alpha", "0.9", "--numeric", "--out", out) == 0
    row = read_csv(out)[0]
    assert float(row["C_numeric"]) == pytest.approx(float(row["C_analytic"]), rel=1e-9)
    assert len(row["alpha"].replace("0.", "")) >= 16  # 17 significant digits


def test_sweep_empty_grid(tmp_path):
    out = tmp_path / "s.csv"
    assert run(tmp_path, "sweep", "--n", "", "--out", out) == 0
    assert out.read_text().strip().split(",")[0] == "n"
    assert len(out.read_text().strip().splitlines()) == 1


def test_simulate_report(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(tmp_path, "simulate", "--n", 2, "--samples", 100000, "--seed", 3, "--out", a) == 0
    assert run(tmp_path, "simulate", "--n", 2, "--samples", 100000, "--seed", 3, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = io.load(a)
    assert rep["status"] == "PASS"
    assert rep["seed"] == 3 and rep["version"]
    assert rep["parameters"]["samples"] == 100000


def test_simulate_small_warns(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert run(tmp_path, "simulate", "--samples", 10, "--out", out) == 0
    assert io.load(out)["warnings"]
    assert "warning" in capsys.readouterr().err


def test_parsers():
    assert parse_int_range("2:4") == [2, 3, 4]
    assert parse_int_range("") == []
    assert parse_float_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_float_grid("auto") == "auto"
    assert resolve_theta("auto", 0.5) == pytest.approx(np.pi / 4)
    assert resolve_theta("0.7854", 0.5) == np.pi / 4
    with pytest.raises(ArgumentError):
        parse_int_range("a:b")
