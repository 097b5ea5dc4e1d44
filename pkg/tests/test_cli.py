import json

import numpy as np
import pytest

from ncol import spectral
from ncol.cli import SWEEP_HEADER, WEAKFORCE_HEADER, main


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_central_collinear(capsys):
    rc, out, _ = run(capsys, "central", "--family", "collinear3", "--alpha", "1")
    assert rc == 0
    payload = json.loads(out)
    assert payload["b"] == pytest.approx(3.5355339, abs=1e-6)
    assert payload["residual"] < 1e-9
    assert set(payload) == {"alpha", "dim", "masses", "positions", "b", "residual", "family"}


def test_central_ngon_value(capsys):
    rc, out, _ = run(capsys, "central", "--family", "ngon", "--n", "4", "--alpha", "1")
    assert rc == 0
    assert json.loads(out)["b"] == pytest.approx(2 + 4 * np.sqrt(2), rel=1e-12)


def test_central_ngon3_warns_but_succeeds(capsys):
    with pytest.warns(UserWarning):
        rc, out, _ = run(capsys, "central", "--family", "ngon", "--n", "3", "--alpha", "1")
    assert rc == 0
    assert json.loads(out)["b"] == pytest.approx(3.0, rel=1e-12)


def test_central_file_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "cc.json"
    rc, out, _ = run(capsys, "central", "--family", "collinear3", "--alpha", "1",
                     "--out", str(cfg))
    assert rc == 0
    # emitted JSON is accepted as --file input by other commands
    rc, out, _ = run(capsys, "central", "--family", "file", "--file", str(cfg))
    assert rc == 0
    assert json.loads(out)["b"] == pytest.approx(3.5355339, abs=1e-6)


def test_file_config_accepted_by_other_commands(tmp_path, capsys):
    cfg = tmp_path / "ngon4.json"
    rc, _, _ = run(capsys, "central", "--family", "ngon", "--n", "4", "--alpha", "1",
                   "--out", str(cfg))
    assert rc == 0
    rc, out, _ = run(capsys, "spectral", "--family", "file", "--file", str(cfg))
    assert rc == 0
    assert json.loads(out)["satisfied"] in (True, False)
    traj_path = tmp_path / "t.csv"
    rc, _, _ = run(capsys, "simulate", "--family", "file", "--file", str(cfg),
                   "--tau-max", "1.0", "--out", str(traj_path))
    assert rc == 0
    assert traj_path.exists()
    # the file's alpha is honored when --alpha is omitted
    rc, out, _ = run(capsys, "central", "--family", "file", "--file", str(cfg))
    assert json.loads(out)["alpha"] == 1.0


def test_spectral_command(capsys):
    rc, out, _ = run(capsys, "spectral", "--family", "collinear3", "--alpha", "1")
    assert rc == 0
    payload = json.loads(out)
    assert payload["satisfied"] is True
    assert payload["margin"] == pytest.approx(-4.5078057, abs=1e-6)


def test_threshold_command(capsys):
    rc, out, _ = run(capsys, "threshold", "--family", "collinear3")
    assert rc == 0
    payload = json.loads(out)
    assert payload["alpha_star"] < 6 - 4 * np.sqrt(2)
    assert payload["residual"] < 1e-12


def test_sweep_header_and_rows(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    rc, _, _ = run(capsys, "sweep", "--alpha-min", "0.1", "--alpha-max", "1.9",
                   "--steps", "7", "--out", str(out_path))
    assert rc == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER
    assert len(lines) == 1 + 2 * 7


def test_sweep_empty_range_exits_one(capsys):
    rc, _, err = run(capsys, "sweep", "--alpha-min", "1.0", "--alpha-max", "0.5",
                     "--steps", "10")
    assert rc == 1
    assert "usage error" in err


def test_sweep_crossings_bracket_thresholds(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    steps = 200
    rc, _, _ = run(capsys, "sweep", "--alpha-min", "0.05", "--alpha-max", "1.0",
                   "--steps", str(steps), "--out", str(out_path))
    assert rc == 0
    rows = [ln.split(",") for ln in out_path.read_text().splitlines()[1:]]
    eq_rows = [(float(r[0]), int(r[5])) for r in rows if r[1] == "collinear3-equal"]
    flips = [(a1, a2) for (a1, h1), (a2, h2) in zip(eq_rows, eq_rows[1:]) if h1 != h2]
    assert len(flips) == 1
    th = spectral.collinear_threshold().alpha_star
    assert flips[0][0] <= th <= flips[0][1]


def test_figure1_contains_newtonian_row(tmp_path, capsys):
    out_path = tmp_path / "fig1.csv"
    rc, _, _ = run(capsys, "figure1", "--out", str(out_path))
    assert rc == 0
    rows = [ln.split(",") for ln in out_path.read_text().splitlines()[1:]]
    alphas = np.array([float(r[0]) for r in rows if r[1] == "collinear3-equal"])
    assert alphas.size == 400
    k = int(np.argmin(np.abs(alphas - 1.0)))
    row = [r for r in rows if r[1] == "collinear3-equal"][k]
    assert float(row[4]) == pytest.approx(1.125, abs=5e-3)
    # containment: wherever the equal-mass condition holds, the B condition holds
    holds_eq = {r[0]: int(r[5]) for r in rows if r[1] == "collinear3-equal"}
    holds_b = {r[0]: int(r[5]) for r in rows if r[1] == "collinear3-B"}
    for a, h in holds_eq.items():
        if h:
            assert holds_b[a] == 1


def test_simulate_command(tmp_path, capsys):
    out_path = tmp_path / "traj.csv"
    rc, _, err = run(capsys, "simulate", "--family", "collinear3", "--alpha", "1",
                     "--energy", "0", "--tau-max", "50", "--out", str(out_path))
    assert rc == 0
    lines = out_path.read_text().splitlines()
    header = lines[0].split(",")
    i_lam1, i_rho = header.index("lambda1"), header.index("rho")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    # constant multiplier column over the numerically trusted prefix
    beta = 6.0
    trusted = data[:, i_rho] ** (-beta) * np.finfo(float).eps < 2e-9
    lam1 = data[trusted, i_lam1]
    assert lam1.size > 50
    assert np.max(np.abs(lam1 - lam1[0])) < 1e-7


def test_simulate_rejects_oversized_perturbation(capsys):
    rc, _, err = run(capsys, "simulate", "--family", "collinear3", "--alpha", "1",
                     "--energy", "-3.4", "--perturb", "3.0")
    assert rc == 1


def test_morse_command_counts(tmp_path, capsys):
    out_path = tmp_path / "morse.json"
    rc, _, err = run(capsys, "morse", "--family", "collinear3", "--alpha", "1",
                     "--bumps", "10", "--out", str(out_path))
    assert rc == 0
    payload = json.loads(out_path.read_text())
    assert payload["witnesses"] == 10
    assert payload["Q"] < 0
    assert set(payload) == {"Q", "kinetic", "rho_term", "cross", "hessian", "witnesses"}

    rc, _, _ = run(capsys, "morse", "--family", "collinear3", "--alpha", "0.05",
                   "--bumps", "10", "--out", str(out_path))
    assert rc == 0
    assert json.loads(out_path.read_text())["witnesses"] == 0


def test_morse_command_ngon(tmp_path, capsys):
    # polygon probe runs in the 3d embedding; criterion holds at alpha = 1
    out_path = tmp_path / "morse_ngon.json"
    rc, _, _ = run(capsys, "morse", "--family", "ngon", "--n", "4", "--alpha", "1",
                   "--bumps", "3", "--out", str(out_path))
    assert rc == 0
    assert json.loads(out_path.read_text())["witnesses"] == 3


def test_weakforce_command(tmp_path, capsys):
    out_path = tmp_path / "wf.csv"
    rc, _, err = run(capsys, "weakforce", "--eps", "0.5", "--out", str(out_path))
    assert rc == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == WEAKFORCE_HEADER
    assert len(lines) == 7


def test_unknown_family_is_usage_error(capsys):
    rc, _, err = run(capsys, "central", "--family", "nonsense")
    assert rc == 1
    assert "usage error" in err


def test_missing_file_is_io_error(capsys):
    rc, _, err = run(capsys, "central", "--family", "file", "--file", "/nonexistent.json")
    assert rc == 1


def test_threads_env_cap(monkeypatch, capsys):
    monkeypatch.setenv("NCOL_THREADS", "1")
    rc, out, _ = run(capsys, "sweep", "--alpha-min", "0.5", "--alpha-max", "1.5",
                     "--steps", "3")
    assert rc == 0
    assert out.splitlines()[0] == SWEEP_HEADER


def test_parallel_sweep_deterministic(monkeypatch, capsys):
    monkeypatch.setenv("NCOL_THREADS", "1")
    rc, serial, _ = run(capsys, "sweep", "--alpha-min", "0.2", "--alpha-max", "1.8",
                        "--steps", "9")
    assert rc == 0
    monkeypatch.setenv("NCOL_THREADS", "4")
    rc, threaded, _ = run(capsys, "sweep", "--alpha-min", "0.2", "--alpha-max", "1.8",
                          "--steps", "9")
    assert rc == 0
    assert threaded == serial  # rows merged in alpha order regardless of workers
