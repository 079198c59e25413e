import json

import numpy as np
import pytest

from scrap import cli
from scrap.dynamics import read_columns_csv
from scrap.geophase import ControlPath

COARSE = ["--set", "grid.n_tau=6", "--set", "grid.n_sigma=5"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


# config handling --------------------------------------------------------------------

@pytest.mark.parametrize("name", cli.preset_names())
def test_every_preset_resolves(name):
    args = cli.build_parser().parse_args(["simulate", "--config", name])
    cfg = cli.resolve_config(args)
    cli._pulse(cfg)
    cli._integrator(cfg)
    cli._grid(cfg)
    assert cfg["scenario"] == name


def test_default_preset_values():
    cfg = cli.resolve_config(cli.build_parser().parse_args(["simulate", "--config", "paper-defaults"]))
    assert cfg["pulse"] == {"S0": 1.0, "Delta0": 100.0, "Omega0": 100.0, "sigma_p": 5.0,
                            "t_p": 50.0, "sigma_s": 10.0, "t_s": 65.0}
    assert cfg["window"] == {"t_i": 0.0, "t_f": 100.0}


def test_unknown_config_is_config_error(tmp_path):
    assert run("simulate", "--config", "no-such-preset", "--out", tmp_path / "o") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("simulate", "--config", bad, "--out", tmp_path / "o") == 2
    loop = tmp_path / "loop.json"
    loop.write_text(json.dumps({"extends": str(loop)}))
    assert run("simulate", "--config", loop, "--out", tmp_path / "o") == 2
    assert not (tmp_path / "o").exists()


def test_file_config_extends_preset(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"extends": "paper-defaults", "point": {"tau": 0.07, "sigma": 1.2}}))
    out = tmp_path / "o"
    assert run("simulate", "--config", f, "--out", out, "--set", "integrator.n_samples=101") == 0
    cfg = load(out / "config.resolved.json")
    assert cfg["point"] == {"tau": 0.07, "sigma": 1.2}
    assert cfg["integrator"]["n_samples"] == 101
    assert len(read_columns_csv(out / "trajectory.csv")["t"]) == 101


def test_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SCRAP_OUT", str(tmp_path))
    assert run("geophase", "--config", "geophase-circle") == 0
    assert (tmp_path / "geophase" / "manifest.json").is_file()


# manifests ----------------------------------------------------------------------------

def test_manifest_and_verify(tmp_path, capsys):
    out = tmp_path / "am"
    assert run("adiabatic-map", "--config", "paper-defaults", "--out", out, *COARSE) == 0
    man = load(out / "manifest.json")
    names = {f["path"] for f in man["files"]}
    assert {"config.resolved.json", "adiabatic_p2.csv", "adiabaticity.csv",
            "critical_points.json"} <= names
    assert man["tool_version"] == "0.1.0" and len(man["config_sha256"]) == 64
    assert man["finished"] >= man["started"]
    assert run("verify", out) == 0
    (out / "adiabatic_p2.csv").write_text("tampered\n")
    assert run("verify", out) == 1
    assert "MISMATCH adiabatic_p2.csv" in capsys.readouterr().out
    assert run("verify", tmp_path / "nothing") == 2


def test_reruns_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run("bloch-map", "--config", "fig2-bloch-map-coarse", "--out", tmp_path / d,
                   "--workers", 1) == 0
    ma, mb = load(tmp_path / "a" / "manifest.json"), load(tmp_path / "b" / "manifest.json")
    assert ma["files"] == mb["files"]
    assert ma["config_sha256"] == mb["config_sha256"]


# commands -----------------------------------------------------------------------------

def test_adiabatic_map_critical_points(tmp_path):
    out = tmp_path / "am"
    assert run("adiabatic-map", "--config", "fig1-adiabatic-map", "--out", out, *COARSE) == 0
    pts = load(out / "critical_points.json")["points"]
    got = sorted((round(p["tau"], 2), round(p["sigma"], 1)) for p in pts)
    assert got == [(-0.18, 4.8), (0.3, 0.0), (0.78, 4.8)]


def test_probe_time_override(tmp_path):
    out = tmp_path / "am"
    assert run("adiabatic-map", "--config", "paper-defaults", "--probe-time", 70, "--out", out,
               *COARSE) == 0
    assert load(out / "critical_points.json")["tau_T"] == pytest.approx(0.4)


def test_empty_grid_exit_2_without_files(tmp_path):
    out = tmp_path / "am"
    assert run("adiabatic-map", "--config", "paper-defaults", "--set", "grid.n_tau=0",
               "--out", out) == 2
    assert not out.exists()


def test_bloch_map_zero_pump_flat(tmp_path):
    out = tmp_path / "bm"
    assert run("bloch-map", "--config", "fig2-bloch-map-coarse", "--set", "pulse.Omega0=0",
               "--out", out) == 0
    from scrap.landscape import read_matrix_csv
    assert np.all(read_matrix_csv(out / "full_pa.csv")[4] == 0.0)


def test_simulate_point_x(tmp_path):
    out = tmp_path / "x"
    assert run("simulate", "--config", "fig3-point-x", "--out", out) == 0
    s = load(out / "summary.json")
    assert s["max_abs_rna1"] <= 0.25 and s["max_abs_rna3"] <= 0.25
    assert s["final_P2"] >= 0.99
    cols = read_columns_csv(out / "trajectory.csv")
    assert list(cols)[:4] == ["t", "r1", "r2", "r3"]
    assert {"rad1", "rad3", "rna1", "rna3", "AD"} <= set(cols)


def test_simulate_point_y_non_adiabatic(tmp_path):
    out = tmp_path / "y"
    assert run("simulate", "--config", "fig3-point-y", "--out", out) == 0
    s = load(out / "summary.json")
    assert s["max_AD"] > 1.0 and s["max_abs_rna1"] > 0.5


def test_simulate_zero_fields(tmp_path):
    out = tmp_path / "z"
    args = ["simulate", "--config", "paper-defaults", "--set", "fields.kind=constant", "--out", out]
    assert run(*args) == 4
    assert not out.exists()
    assert run(*args, "--allow-singular") == 0
    cols = read_columns_csv(out / "trajectory.csv")
    assert np.all(cols["r3"] == -1.0) and np.all(np.isnan(cols["rad3"]))


def test_pmp_energy(tmp_path):
    out = tmp_path / "pmp"
    assert run("pmp", "--config", "fig4-energy", "--out", out, "--set", "cost.n_random=0") == 0
    s = load(out / "extremal.json")
    assert s["residual"] < 1e-4 and s["cost_tag"] == "energy"
    assert load(out / "conservation.json")["lsq_drift"] < 1e-8
    assert (out / "candidates.json").is_file()


def test_pmp_rejects_ensemble_tag(tmp_path):
    assert run("pmp", "--config", "paper-defaults", "--set", "cost.tag=ensemble-linear",
               "--out", tmp_path / "p") == 2


def test_pmp_solver_failure_exit_3(tmp_path, monkeypatch):
    from scrap import pmp

    def fail(*a, **k):
        raise pmp.ShootingFailure("no guess converged (1 tried)", [{"index": 0, "converged": False}])

    monkeypatch.setattr(pmp, "solve_shooting", fail)
    out = tmp_path / "p"
    assert run("pmp", "--config", "fig4-energy", "--out", out) == 3
    diag = load(out / "shooting_diagnostics.json")
    assert diag["attempts"] == [{"index": 0, "converged": False}]


def test_ensemble_linear(tmp_path):
    out = tmp_path / "ens"
    assert run("ensemble", "--config", "fig5c-linear-ensemble", "--out", out) == 0
    s = load(out / "ensemble_summary.json")
    assert s["z"] == [0.0, 0.5, 1.0] and min(s["final_P2"]) >= 0.99
    assert len(list((out / "members").glob("member_*.csv"))) == 3


def test_ensemble_zt_zero_amplitude(tmp_path):
    out = tmp_path / "ens"
    assert run("ensemble", "--config", "fig5-zt-ensemble", "--set", "perturbation.A=0",
               "--set", "perturbation.n_z=4", "--out", out) == 0
    assert load(out / "ensemble_summary.json")["max_cross_z_r3_deviation"] == 0.0
    assert (out / "perturbation_surface.csv").is_file()


def test_stability_small(tmp_path):
    out = tmp_path / "st"
    assert run("stability", "--config", "fig6-stability", "--axis", "A",
               "--set", "stability.ranges.A=[0, 0.5, 6]", "--out", out) == 0
    acc = load(out / "acceptance.json")
    assert acc["acceptance_box"]["A"][0] == 0.0
    from scrap.landscape import read_matrix_csv
    vals = read_matrix_csv(out / "stability_A.csv")[4]
    assert np.all(vals[0] == vals[0, 0])


def test_stability_zero_threshold(tmp_path):
    out = tmp_path / "st"
    assert run("stability", "--config", "fig6-stability", "--axis", "A", "--threshold", 0,
               "--set", "stability.ranges.A=[0, 0.1, 3]", "--out", out) == 0
    assert load(out / "acceptance.json")["acceptance_box"] == {"A": None}


def test_stability_bad_range(tmp_path):
    assert run("stability", "--config", "fig6-stability", "--axis", "w",
               "--set", "stability.ranges.w=[5, 1, 3]", "--out", tmp_path / "s") == 2


@pytest.mark.parametrize("preset,winding,gamma", [
    ("geophase-circle", 1, np.pi), ("geophase-offset-circle", 0, 0.0),
    ("fig8-cpr-gaussian", 1, np.pi)])
def test_geophase_presets(tmp_path, preset, winding, gamma):
    out = tmp_path / preset
    assert run("geophase", "--config", preset, "--out", out) == 0
    rep = load(out / "phase_report.json")
    assert rep["winding"] == winding
    assert rep["gamma"] == pytest.approx(gamma, abs=1e-6)


def test_geophase_path_file(tmp_path):
    t = np.linspace(0, 2 * np.pi, 129)
    f = ControlPath(t, 5 * np.sin(t), 5 * np.cos(t)).to_csv(tmp_path / "p.csv")
    out = tmp_path / "g"
    assert run("geophase", "--config", "paper-defaults", "--path", f, "--out", out) == 0
    assert load(out / "phase_report.json")["gamma"] == pytest.approx(np.pi, abs=1e-8)


def test_geophase_open_and_singular(tmp_path):
    t = np.linspace(0, np.pi, 65)
    f = ControlPath(t, -np.cos(t), np.sin(t)).to_csv(tmp_path / "half.csv")
    assert run("geophase", "--path", f, "--out", tmp_path / "a") == 2
    assert run("geophase", "--path", f, "--allow-open", "--out", tmp_path / "b") == 0
    assert load(tmp_path / "b" / "phase_report.json")["winding"] is None
    assert run("geophase", "--config", "geophase-circle", "--set", "geophase.center=[1, 0]",
               "--out", tmp_path / "c") == 4
