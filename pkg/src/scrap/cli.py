"""``scrap`` command-line runner.

Every subcommand reads one JSON config (a file path or the name of a bundled
preset), applies command-line overrides, echoes the resolved config into the
output directory and writes a ``manifest.json`` with SHA-256 digests of all
outputs. ``scrap verify DIR`` re-checks those digests.

Exit codes: 0 success, 1 verification mismatch, 2 config error, 3 solver
failure, 4 singular input.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import asdict
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import IntegrationError, IntegratorConfig, integrate_bloch, write_columns_csv
from .fields import ConstantField, GaussianField
from .model import (SOUTH_POLE, ConicalIntersectionError, ControlSample, PulseParams,
                    adiabatic_bloch, gaussian_sample, mixing_angle, nabc, populations)

log = logging.getLogger("scrap")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_SOLVER, EXIT_SINGULAR = 0, 1, 2, 3, 4

DEFAULTS: dict = {
    "scenario": "paper-defaults",
    "pulse": {"S0": 1.0, "Delta0": 100.0, "Omega0": 100.0, "sigma_p": 5.0, "t_p": 50.0},
    "window": {"t_i": 0.0, "t_f": 100.0},
    "probe_time": None,
    "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-10, "max_step": 1.0, "method": "dp45",
                   "n_samples": 1001},
    "grid": {"tau_min": -0.5, "tau_max": 1.0, "n_tau": 121,
             "sigma_min": 0.05, "sigma_max": 6.0, "n_sigma": 121},
    "point": {"tau": 0.3, "sigma": 2.0},
    "fields": {"kind": "gaussian"},
    "allow_singular": False,
    "cost": {"tag": "energy", "select": "first", "tol": 1e-4, "n_random": 20,
             "controls_at_rest": True},
    "perturbation": {"kind": "linear", "k": 0.01, "A": 0.05, "w": 20.0,
                     "z_min": 0.0, "z_max": 1.0, "n_z": 3, "z": None},
    "stability": {"axes": ["A", "k", "w"], "threshold": 0.05, "n_z": 11, "probe": None,
                  "ranges": {"A": [0.0, 0.5, 51], "k": [0.0, 20.0, 41], "w": [0.0, 40.0, 81]},
                  "operating_point": {"A": 0.05, "w": 20.0, "k": 10.0}},
    "geophase": {"path": None, "preset": "circle", "radius": 1.0, "center": [0.0, 0.0],
                 "n": 257, "window": [-20.0, 150.0], "closure_tol": 1e-8, "allow_open": False},
    "seed": 0,
    "workers": None,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_names() -> list[str]:
    root = resources.files("scrap") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_config(ref: str, seen=()) -> dict:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files("scrap") / "configs" / f"{ref}.json"
        if not res.is_file():
            raise ConfigError(f"config {ref!r} is neither a file nor a preset "
                              f"({', '.join(preset_names())})")
        text = res.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {ref!r}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    parent = doc.pop("extends", None)
    if parent:
        if parent in seen:
            raise ConfigError(f"circular 'extends' through {parent!r}")
        doc = _merge(_read_config(parent, seen + (ref,)), doc)
    return doc


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        cfg = _merge(cfg, _read_config(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(cfg, key.strip(), value)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    for attr, key in (("probe_time", "probe_time"), ("cost", "cost.tag"), ("axis", "stability.axes"),
                      ("path", "geophase.path"), ("threshold", "stability.threshold"),
                      ("tau", "point.tau"), ("sigma", "point.sigma")):
        v = getattr(args, attr, None)
        if v is not None:
            _set_path(cfg, key, [v] if attr == "axis" else v)
    if getattr(args, "allow_open", False):
        cfg["geophase"]["allow_open"] = True
    if getattr(args, "allow_singular", False):
        cfg["allow_singular"] = True
    return cfg


def _pulse(cfg) -> PulseParams:
    try:
        return PulseParams(**cfg["pulse"])
    except TypeError as exc:
        raise ConfigError(f"pulse: {exc}") from None


def _integrator(cfg) -> IntegratorConfig:
    try:
        return IntegratorConfig(**cfg["integrator"])
    except TypeError as exc:
        raise ConfigError(f"integrator: {exc}") from None


def _grid(cfg):
    from .landscape import GridSpec
    try:
        return GridSpec(**cfg["grid"])
    except TypeError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _probe(cfg, p: PulseParams) -> float:
    return p.probe_time() if cfg.get("probe_time") is None else float(cfg["probe_time"])


def _workers(cfg) -> int:
    w = cfg.get("workers")
    return int(w) if w else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Output handling
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return None if not np.isfinite(x) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, command: str, cfg: dict, out: Optional[str]):
        root = out or os.path.join(os.environ.get("SCRAP_OUT", "scrap-out"), command)
        self.dir = Path(root)
        self.command = command
        self.cfg = cfg
        self.files: list[Path] = []
        self.summary: dict = {}
        self.started = time.time()

    def open(self) -> "Run":
        self.dir.mkdir(parents=True, exist_ok=True)
        self.add(write_json(self.dir / "config.resolved.json", self.cfg))
        return self

    def add(self, *paths) -> None:
        for p in paths:
            if isinstance(p, (list, tuple)):
                self.add(*p)
            else:
                self.files.append(Path(p))

    def json(self, name: str, doc) -> Path:
        p = write_json(self.dir / name, doc)
        self.add(p)
        return p

    def close(self, status: int) -> int:
        cfg_bytes = json.dumps(_jsonable(self.cfg), sort_keys=True).encode()
        manifest = {
            "tool": "scrap", "tool_version": __version__, "command": self.command,
            "config_sha256": hashlib.sha256(cfg_bytes).hexdigest(),
            "started": self.started, "finished": time.time(), "exit_code": status,
            "files": [{"path": str(p.relative_to(self.dir)), "sha256": _sha256(p)}
                      for p in self.files],
            "summary": self.summary,
        }
        write_json(self.dir / "manifest.json", manifest)
        return status


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_adiabatic_map(cfg, out) -> int:
    from .landscape import adiabaticity_map, critical_points, efficiency_map

    p = _pulse(cfg)
    grid = _grid(cfg)
    T = _probe(cfg, p)
    run = Run("adiabatic-map", cfg, out).open()
    p2 = efficiency_map("adiabatic-P2", grid, p, T=T, t_i=cfg["window"]["t_i"])
    ad = adiabaticity_map(T, grid, p)
    run.add(p2.export(run.dir, "adiabatic_p2"), ad.export(run.dir, "adiabaticity"))
    cps = critical_points(T, p, (grid.tau_min, grid.tau_max), (0.0, grid.sigma_max))
    doc = {"probe_time": T, "tau_T": (T - p.t_p) / p.t_p,
           "points": [c.as_dict() for c in cps]}
    run.json("critical_points.json", doc)
    run.summary = {"critical_points": doc["points"]}
    return run.close(EXIT_OK)


def cmd_bloch_map(cfg, out) -> int:
    from .landscape import full_maps

    p = _pulse(cfg)
    grid = _grid(cfg)
    icfg = _integrator(cfg)
    T = _probe(cfg, p)
    run = Run("bloch-map", cfg, out).open()
    pa, pb = full_maps(grid, p, icfg, T, cfg["window"]["t_i"], _workers(cfg))
    run.add(pa.export(run.dir, "full_pa"), pb.export(run.dir, "full_pb"))
    n = pa.values.size
    missing = int(np.isnan(pa.values).sum())
    doc = {"Pa": pa.sidecar()["argmax"], "Pb": pb.sidecar()["argmax"],
           "missing_cells": missing, "cells": n}
    run.json("argmax.json", doc)
    run.summary = doc
    return run.close(EXIT_OK if missing <= 0.01 * n else EXIT_SOLVER)


def _simulate_field(cfg, p):
    f = cfg.get("fields", {})
    kind = f.get("kind", "gaussian")
    if kind == "gaussian":
        q = p.with_reduced(cfg["point"]["tau"], cfg["point"]["sigma"])
        return GaussianField(q), q
    if kind == "constant":
        return ConstantField(f.get("delta", 0.0), f.get("omega", 0.0)), None
    raise ConfigError(f"unknown field kind {kind!r}")


def cmd_simulate(cfg, out) -> int:
    p = _pulse(cfg)
    icfg = _integrator(cfg)
    field, q = _simulate_field(cfg, p)
    t_i, t_f = cfg["window"]["t_i"], cfg["window"]["t_f"]
    # validate before touching the file system
    probe = field.sample(np.linspace(t_i, t_f, icfg.n_samples))
    sing = (np.asarray(probe.delta) == 0) & (np.asarray(probe.omega) == 0)
    if sing.any() and not cfg.get("allow_singular"):
        idx = int(np.argmax(sing))
        raise ConicalIntersectionError(
            f"controls vanish at t = {np.linspace(t_i, t_f, icfg.n_samples)[idx]:.6g} "
            f"({int(sing.sum())} samples); pass --allow-singular to write NaN frame columns")
    run = Run("simulate", cfg, out).open()
    traj = integrate_bloch(field, SOUTH_POLE, t_i, t_f, icfg)
    s = field.sample(traj.times) if q is None else gaussian_sample(traj.times, q)
    theta = np.full(len(traj.times), np.nan)
    ok = ~((np.asarray(s.delta) == 0) & (np.asarray(s.omega) == 0))
    theta[ok] = mixing_angle(ControlSample(np.asarray(s.delta)[ok], np.asarray(s.omega)[ok]))
    rad = adiabatic_bloch(theta)
    rna = nabc(traj.states, rad)
    ad = traj.extras.get("AD", np.zeros(len(traj.times)))
    cols = {"t": traj.times, "r1": traj.states[:, 0], "r2": traj.states[:, 1],
            "r3": traj.states[:, 2], "rad1": rad[:, 0], "rad2": rad[:, 1], "rad3": rad[:, 2],
            "rna1": rna[:, 0], "rna2": rna[:, 1], "rna3": rna[:, 2],
            "delta": traj.delta, "omega": traj.omega, "AD": ad,
            "P2": populations(traj.states)[1]}
    run.add(write_columns_csv(run.dir / "trajectory.csv", cols))
    # after the mute resonance R is antiparallel to w by design, so the
    # NABC bound is taken over [t_i, T]
    T = _probe(cfg, p)
    win = traj.times <= T

    def peak(x, mask=slice(None)):
        x = np.abs(x[mask])
        return float(np.nanmax(x)) if np.any(np.isfinite(x)) else None

    summ = {"final_P2": float(cols["P2"][-1]), "norm_drift": traj.norm_drift,
            "probe_time": T, "P2_at_probe": float(np.interp(T, traj.times, cols["P2"])),
            "max_abs_rna1": peak(rna[:, 0], win), "max_abs_rna3": peak(rna[:, 2], win),
            "max_abs_rna1_full": peak(rna[:, 0]), "max_abs_rna3_full": peak(rna[:, 2]),
            "max_AD": peak(ad, win), "max_AD_full": peak(ad),
            "singular_samples": int((~ok).sum()),
            "reduced": None if q is None else asdict(q.reduced)}
    run.json("summary.json", summ)
    run.summary = summ
    return run.close(EXIT_OK)


def _select(extremals, how):
    if how == "cheapest":
        return min(extremals, key=lambda e: (e.cost_value, e.guess_index))
    return min(extremals, key=lambda e: e.guess_index)


def _shoot(cfg, sp, run):
    from .pmp import ShootingFailure, guess_ladder, solve_shooting

    c = cfg["cost"]
    guesses = guess_ladder(int(c.get("n_random", 20)), int(cfg["seed"]))
    how = c.get("select", "first")
    if how not in ("first", "cheapest"):
        raise ConfigError("cost.select must be 'first' or 'cheapest'")
    try:
        found = solve_shooting(sp, guesses, float(c.get("tol", 1e-4)), _integrator(cfg),
                               collect_all=True, workers=_workers(cfg), seed=int(cfg["seed"]))
    except ShootingFailure as exc:
        run.json("shooting_diagnostics.json", {"error": str(exc), "attempts": exc.diagnostics})
        raise
    return _select(found, how), found


def cmd_pmp(cfg, out) -> int:
    from .pmp import CostFunctional, ShootingProblem

    tag = cfg["cost"]["tag"]
    if tag not in ("energy", "fixed-pump-energy", "mixed-adiabatic"):
        raise ConfigError("pmp cost must be energy, fixed-pump-energy or mixed-adiabatic; "
                          "use the ensemble command for ensemble costs")
    p = _pulse(cfg)
    cost = CostFunctional(tag, pump=p if tag == "fixed-pump-energy" else None)
    sp = ShootingProblem(cost=cost, t_i=cfg["window"]["t_i"], t_f=cfg["window"]["t_f"],
                         controls_at_rest=bool(cfg["cost"].get("controls_at_rest", True)))
    _integrator(cfg)
    run = Run("pmp", cfg, out).open()
    best, found = _shoot(cfg, sp, run)
    run.add(best.export(run.dir, "extremal"))
    run.json("candidates.json", [e.summary() for e in found])
    run.json("conservation.json", best.conservation)
    run.summary = best.summary()
    return run.close(EXIT_OK)


def _perturbation(cfg):
    from .inhomogeneity import LinearInhom, SpaceTimePerturbation

    pc = cfg["perturbation"]
    kind = pc.get("kind", "linear")
    if kind == "linear":
        return LinearInhom(pc["k"], pc["z_min"], pc["z_max"])
    if kind == "zt":
        return SpaceTimePerturbation(pc["A"], pc["w"], pc["k"], pc["z_min"], pc["z_max"],
                                     cfg["window"]["t_i"], cfg["window"]["t_f"], cfg["pulse"]["S0"])
    raise ConfigError(f"unknown perturbation kind {kind!r}")


def cmd_ensemble(cfg, out) -> int:
    from .inhomogeneity import ensemble_bundle
    from .pmp import CostFunctional, ShootingProblem, build_extremal

    spec = _perturbation(cfg)
    pc = cfg["perturbation"]
    z = pc.get("z")
    z = np.linspace(spec.z_min, spec.z_max, int(pc.get("n_z", 3))) if z is None else np.asarray(z, float)
    tag = "ensemble-linear" if spec.tag == "linear" else "ensemble-zt"
    sp = ShootingProblem(cost=CostFunctional(tag, inhom=spec), t_i=cfg["window"]["t_i"],
                         t_f=cfg["window"]["t_f"])
    icfg = _integrator(cfg)
    run = Run("ensemble", cfg, out).open()
    best, _ = _shoot(cfg, sp, run)
    full = build_extremal(sp, best.p_initial, icfg, residual=best.residual,
                          iterations=best.iterations, guess_index=best.guess_index,
                          members=list(z))
    bundle = ensemble_bundle(full, list(z), spec)
    run.add(best.export(run.dir, "extremal"), bundle.export(run.dir / "members"))
    if spec.tag == "zt":
        from .landscape import write_matrix_csv
        ts = np.linspace(spec.t_i, spec.t_f, 101)
        surf = spec.f(ts)[:, None] * spec.eps(z)[None, :]
        run.add(write_matrix_csv(run.dir / "perturbation_surface.csv", "t", ts, "z", z, surf))
    summ = {"extremal": best.summary(), "z": z, "final_P2": bundle.final_p2,
            "max_cross_z_r3_deviation": float(np.max(np.abs(bundle.states[:, :, 2]
                                                             - bundle.states[0, :, 2])))}
    run.json("ensemble_summary.json", summ)
    run.summary = summ
    return run.close(EXIT_OK)


def cmd_stability(cfg, out) -> int:
    from .inhomogeneity import STABILITY_AXES, SpaceTimePerturbation, acceptance_box, stability_map

    st = cfg["stability"]
    axes = st["axes"]
    if not axes or any(a not in STABILITY_AXES for a in axes):
        raise ConfigError(f"stability axes must be drawn from {STABILITY_AXES}")
    op = st["operating_point"]
    pc = cfg["perturbation"]
    base = SpaceTimePerturbation(op["A"], op["w"], op["k"], pc["z_min"], pc["z_max"],
                                 cfg["window"]["t_i"], cfg["window"]["t_f"], cfg["pulse"]["S0"])
    ranges = {}
    for a in axes:
        lo, hi, n = st["ranges"][a]
        if int(n) < 1 or hi < lo:
            raise ConfigError(f"invalid range for axis {a}")
        ranges[a] = np.linspace(lo, hi, int(n))
    thr = float(st["threshold"])
    if thr < 0:
        raise ConfigError("threshold must be non-negative")
    icfg = _integrator(cfg)
    z = np.linspace(base.z_min, base.z_max, int(st.get("n_z", 11)))
    run = Run("stability", cfg, out).open()
    maps = []
    failed = 0
    for a in axes:
        m = stability_map(a, ranges[a], base, z=z, probe=st.get("probe"), threshold=thr,
                          cfg=icfg, tol=float(cfg["cost"].get("tol", 1e-4)), seed=int(cfg["seed"]))
        maps.append(m)
        failed += int(m.failed.sum())
        run.add(m.export(run.dir))
    box = acceptance_box(maps)
    total = sum(len(m.params) for m in maps)
    doc = {"acceptance_box": box, "threshold": thr,
           "interior": {m.axis: m.is_interior([0.0] if m.axis == "A" else []) for m in maps},
           "failed_cells": failed, "cells": total}
    run.json("acceptance.json", doc)
    run.summary = doc
    return run.close(EXIT_OK if failed <= 0.05 * total else EXIT_SOLVER)


def _geo_path(cfg):
    from .geophase import ControlPath, cpr_gaussian_path

    g = cfg["geophase"]
    if g.get("path"):
        return ControlPath.from_csv(g["path"], closure_tol=float(g["closure_tol"]))
    preset = g.get("preset", "circle")
    r = float(g.get("radius", 1.0))
    cx, cy = g.get("center", [0.0, 0.0])
    if preset == "circle":
        return ControlPath.from_function(lambda t: (cx + r * np.sin(t), cy + r * np.cos(t)),
                                         0.0, 2 * np.pi, int(g["n"]), closure_tol=float(g["closure_tol"]))
    if preset in ("cpr-gaussian", "cpr-gaussian-unsigned"):
        q = _pulse(cfg).with_reduced(cfg["point"]["tau"], cfg["point"]["sigma"])
        # the loop only closes once both Stark tails have died out
        t_a, t_b = g["window"]
        return cpr_gaussian_path(q, float(t_a), float(t_b), int(g["n"]),
                                 signed=preset == "cpr-gaussian",
                                 closure_tol=float(g["closure_tol"]))
    raise ConfigError(f"unknown geophase preset {preset!r}")


def cmd_geophase(cfg, out) -> int:
    from .geophase import phase_report

    path = _geo_path(cfg)
    if not path.closed and not cfg["geophase"].get("allow_open"):
        raise ConfigError("path is open; pass --allow-open to report its polar-angle functional")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = phase_report(path)
    run = Run("geophase", cfg, out).open()
    run.add(path.to_csv(run.dir / "path.csv"))
    run.json("phase_report.json", rep)
    run.summary = rep
    return run.close(EXIT_OK)


def cmd_verify(directory) -> int:
    d = Path(directory)
    man = d / "manifest.json"
    if not man.is_file():
        raise ConfigError(f"no manifest.json in {d}")
    doc = json.loads(man.read_text())
    bad = []
    for entry in doc["files"]:
        p = d / entry["path"]
        if not p.is_file() or _sha256(p) != entry["sha256"]:
            bad.append(entry["path"])
    for b in bad:
        print(f"MISMATCH {b}")
    print(f"{len(doc['files']) - len(bad)}/{len(doc['files'])} files verified")
    return EXIT_MISMATCH if bad else EXIT_OK


COMMANDS = {
    "adiabatic-map": (cmd_adiabatic_map, "adiabatic P2 and AD maps plus critical points"),
    "bloch-map": (cmd_bloch_map, "full-dynamics P^a / P^b efficiency maps"),
    "simulate": (cmd_simulate, "single Bloch trajectory with adiabatic frame and NABC"),
    "pmp": (cmd_pmp, "optimal-control extremal by shooting"),
    "ensemble": (cmd_ensemble, "ensemble-optimal pulse and per-z trajectories"),
    "stability": (cmd_stability, "stability maps over A, k, w"),
    "geophase": (cmd_geophase, "geometric phase and winding of a control path"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scrap", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"scrap {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON config file or preset name")
        sp.add_argument("--out", help="output directory (default $SCRAP_OUT/<command>)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. --set grid.n_tau=11")
        if name in ("adiabatic-map", "bloch-map"):
            sp.add_argument("--probe-time", type=float)
        if name in ("simulate", "geophase"):
            sp.add_argument("--tau", type=float)
            sp.add_argument("--sigma", type=float)
        if name == "simulate":
            sp.add_argument("--allow-singular", action="store_true")
        if name == "pmp":
            sp.add_argument("--cost", choices=["energy", "fixed-pump-energy", "mixed-adiabatic"])
        if name == "stability":
            sp.add_argument("--axis", choices=["A", "k", "w"])
            sp.add_argument("--threshold", type=float)
        if name == "geophase":
            sp.add_argument("--path", help="CSV with header t,delta,omega")
            sp.add_argument("--allow-open", action="store_true")
    vp = sub.add_parser("verify", help="re-check manifest digests of an output directory")
    vp.add_argument("directory")
    sub.add_parser("presets", help="list bundled config presets")
    return ap


def main(argv=None) -> int:
    from .pmp import ShootingFailure

    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.directory)
        if args.command == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        cfg = resolve_config(args)
        fn = COMMANDS[args.command][0]
        return fn(cfg, args.out)
    except ConicalIntersectionError as exc:
        print(f"scrap: singular input: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ShootingFailure, IntegrationError) as exc:
        print(f"scrap: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"scrap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
