"""Spatially and temporally inhomogeneous Stark fields.

A single optimal pulse pair is shared by an ensemble of systems at positions
``z`` in ``[z_min, z_max]`` that see a perturbed detuning. Two perturbations
are supported:

* linear: ``delta(z, t) = (1 + K(z)) delta(t)`` with ``K(z) = k (z - z_min)``;
* space-time: ``delta(t; z) = (1 + f(t) eps(z)) delta(t)`` with
  ``f(t) = A cos(w t / (t_f - t_i))`` and ``eps(z) = cos(k z / Z)``.

Integrating the energy cost over ``z`` gives modified stationarity laws. For
the linear case ``delta* = l3 / c_delta`` and ``omega* = l1 / Z`` with
``c_delta = int (1 + K)^2 dz``. For the space-time case the member at ``z`` is
driven by ``(1 + f eps(z)) l3 / I2(t)`` where ``I2 = int (1 + f eps)^2 dz``; the
state-costate pair is integrated at the reference position ``z_min``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _systems
from .dynamics import ExtremalSystem, IntegratorConfig, write_columns_csv
from .model import ControlSample, populations

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearInhom:
    """Linear field gradient ``K(z) = k (z - z_min)`` over ``[z_min, z_max]``."""

    k: float = 0.01
    z_min: float = 0.0
    z_max: float = 1.0

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ValueError("z_max must exceed z_min")
        if not 1.0 + self.k * self.Z > 0:
            raise ValueError("1 + k Z must be positive (field may not change sign)")

    @property
    def Z(self) -> float:
        return self.z_max - self.z_min

    def K(self, z):
        return self.k * (np.asarray(z, dtype=float) - self.z_min)

    @property
    def tag(self) -> str:
        return "linear"


@dataclass(frozen=True)
class SpaceTimePerturbation:
    """``1 + f(t) eps(z)`` modulation of the Stark field.

    Parameters
    ----------
    A : float
        Amplitude, ``0 <= A <= S0``.
    w : float
        Temporal frequency parameter; ``f(t) = A cos(w t / (t_f - t_i))``.
    k : float
        Spatial wavevector parameter; ``eps(z) = cos(k z / Z)``.
    """

    A: float = 0.05
    w: float = 20.0
    k: float = 10.0
    z_min: float = 0.0
    z_max: float = 1.0
    t_i: float = 0.0
    t_f: float = 100.0
    S0: float = 1.0

    def __post_init__(self):
        if self.A < 0:
            raise ValueError("A must be non-negative")
        if self.A > self.S0:
            raise ValueError("A / S0 must not exceed 1")
        if not self.z_max > self.z_min:
            raise ValueError("z_max must exceed z_min")
        if not self.t_f > self.t_i:
            raise ValueError("t_f must exceed t_i")

    @property
    def Z(self) -> float:
        return self.z_max - self.z_min

    @property
    def span(self) -> float:
        return self.t_f - self.t_i

    @property
    def tag(self) -> str:
        return "zt"

    def f(self, t):
        return self.A * np.cos(self.w * np.asarray(t, dtype=float) / self.span)

    def eps(self, z):
        return np.cos(self.k * np.asarray(z, dtype=float) / self.Z)

    def replace(self, **kw) -> "SpaceTimePerturbation":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SpaceTimePerturbation(**d)


def _check_z(z, spec):
    z = np.asarray(z, dtype=float)
    tol = 1e-12 * max(1.0, abs(spec.z_max))
    if np.any(z < spec.z_min - tol) or np.any(z > spec.z_max + tol):
        raise ValueError(f"z outside window [{spec.z_min}, {spec.z_max}]")
    return z


def perturbed_controls(z, t, base: ControlSample, spec) -> ControlSample:
    """Controls seen at position ``z``; only the detuning is perturbed."""
    z = _check_z(z, spec)
    if spec.tag == "linear":
        scale = 1.0 + spec.K(z)
    else:
        scale = 1.0 + spec.f(t) * spec.eps(z)
    return ControlSample(scale * np.asarray(base.delta), np.asarray(base.omega))


# ---------------------------------------------------------------------------
# Linear gradient
# ---------------------------------------------------------------------------

def ensemble_cost_coeff_linear(inhom: LinearInhom) -> float:
    """``c_delta = int (1 + K(z))^2 dz = ((1 + kZ)^3 - 1) / (3k)``.

    Evaluated in the expanded form ``Z + k Z^2 + k^2 Z^3 / 3``, which is exact
    and has the homogeneous limit ``Z`` at ``k = 0``.
    """
    k, Z = inhom.k, inhom.Z
    return Z + k * Z * Z + k * k * Z ** 3 / 3.0


def optimal_fields_linear(l, inhom: LinearInhom) -> ControlSample:
    """``delta* = l3 / c_delta``, ``omega* = l1 / Z``."""
    l = np.asarray(l, dtype=float)
    return ControlSample(l[..., 2] / ensemble_cost_coeff_linear(inhom), l[..., 0] / inhom.Z)


# ---------------------------------------------------------------------------
# Space-time perturbation
# ---------------------------------------------------------------------------

def _sinc(x):
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def zt_moments(t, pert: SpaceTimePerturbation):
    """z-integrals ``I1 = int (1 + f eps) dz`` and ``I2 = int (1 + f eps)^2 dz``.

    With ``m = (z_min + z_max) / (2 Z)``::

        int eps dz   = Z cos(k m) sinc(k/2)
        int eps^2 dz = Z/2 (1 + cos(2 k m) sinc(k))

    For ``z`` in ``[0, Z]`` these are ``(Z/k) sin k`` and
    ``Z/2 (1 + sin(2k) / (2k))``.
    """
    f = pert.f(t)
    Z, k = pert.Z, pert.k
    m = 0.5 * (pert.z_min + pert.z_max) / Z
    e1 = Z * np.cos(k * m) * _sinc(0.5 * k)
    e2 = 0.5 * Z * (1.0 + np.cos(2.0 * k * m) * _sinc(k))
    return Z + f * e1, Z + 2.0 * f * e1 + f * f * e2


def optimal_stark_zt(t, z, l3, pert: SpaceTimePerturbation):
    """``delta*(t; z) = (1 + f(t) eps(z)) l3(t) / I2(t)``."""
    z = _check_z(z, pert)
    _, i2 = zt_moments(t, pert)
    if np.any(np.asarray(i2) <= 0):
        raise ValueError("non-positive second moment I2")
    return (1.0 + pert.f(t) * pert.eps(z)) * np.asarray(l3, dtype=float) / i2


def optimal_pump_zt(l1, pert: SpaceTimePerturbation):
    """``omega* = l1 / Z`` (position independent)."""
    return np.asarray(l1, dtype=float) / pert.Z


def zt_system(cost, members: Sequence[float] = ()) -> ExtremalSystem:
    """Compiled extremal system for the ``ensemble-zt`` cost.

    The state-costate pair sits at the reference position ``z_min``; each of
    ``members`` adds a Bloch vector driven by the field at that position.
    """
    from .pmp import P0, running_cost

    pert: SpaceTimePerturbation = cost.inhom
    eps_ref = float(pert.eps(pert.z_min))
    members = np.asarray(members, dtype=float)
    if len(members):
        _check_z(members, pert)
    prm = np.concatenate([[pert.A, pert.w, pert.span, pert.k, pert.Z,
                           0.5 * (pert.z_min + pert.z_max), eps_ref, len(members)],
                          pert.eps(members)])

    def controls(t, Y):
        r, p = Y[:, 0:3], Y[:, 3:6]
        l1 = r[:, 1] * p[:, 2] - r[:, 2] * p[:, 1]
        l3 = r[:, 0] * p[:, 1] - r[:, 1] * p[:, 0]
        return optimal_stark_zt(t, pert.z_min, l3, pert), optimal_pump_zt(l1, pert)

    def hamiltonian(t, Y):
        r, p = Y[:, 0:3], Y[:, 3:6]
        l1 = r[:, 1] * p[:, 2] - r[:, 2] * p[:, 1]
        l3 = r[:, 0] * p[:, 1] - r[:, 1] * p[:, 0]
        d, o = controls(t, Y)
        return l1 * o + l3 * d + P0 * running_cost(cost, ControlSample(d, o), t)

    hint = 0.25 * pert.span / max(abs(pert.w), 1e-12)
    return ExtremalSystem(_systems.ZT_FEEDBACK, prm, controls, hamiltonian, tag="ensemble-zt",
                          n_aux=3 * len(members), autonomous=False, max_step_hint=hint)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleBundle:
    """Per-position Bloch trajectories driven by one shared optimal pulse."""

    times: np.ndarray
    z: np.ndarray
    states: np.ndarray  # (n_z, n_t, 3)
    delta: np.ndarray  # (n_z, n_t) detuning seen at each z
    omega: np.ndarray  # (n_t,)
    spec: object = None

    @property
    def final_p2(self) -> np.ndarray:
        return populations(self.states[:, -1, :])[1]

    def export(self, out_dir, stem: str = "member") -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = []
        entries = []
        for i, z in enumerate(self.z):
            path = out_dir / f"{stem}_{i:03d}.csv"
            write_columns_csv(path, {"t": self.times, "r1": self.states[i, :, 0],
                                     "r2": self.states[i, :, 1], "r3": self.states[i, :, 2],
                                     "delta": self.delta[i], "omega": self.omega})
            files.append(path)
            entries.append({"index": i, "z": float(z), "file": path.name,
                            "final_P2": float(self.final_p2[i])})
        man = out_dir / f"{stem}_manifest.json"
        man.write_text(json.dumps({"members": entries}, indent=2) + "\n")
        return files + [man]


def member_detuning(extremal, z, spec) -> np.ndarray:
    """Detuning seen at ``z`` along a solved ensemble extremal."""
    t = extremal.times
    l = extremal.l
    if spec.tag == "linear":
        return (1.0 + spec.K(z)) * l[:, 2] / ensemble_cost_coeff_linear(spec)
    return optimal_stark_zt(t, z, l[:, 2], spec)


def ensemble_bundle(extremal, members: Sequence[float], spec) -> EnsembleBundle:
    """Split the member states of an extremal built with ``members``."""
    aux = extremal.trajectory.extras["aux"]
    n = len(members)
    if aux.shape[1] != 3 * n:
        raise ValueError("extremal was not integrated with these members")
    states = np.stack([aux[:, 3 * i:3 * i + 3] for i in range(n)])
    delta = np.stack([member_detuning(extremal, z, spec) for z in members])
    return EnsembleBundle(extremal.times, np.asarray(members, dtype=float), states, delta,
                          np.asarray(extremal.omega), spec)


def solve_ensemble(spec, members: Sequence[float], *, t_i: float = 0.0, t_f: float = 100.0,
                   cfg: Optional[IntegratorConfig] = None, guesses=None, tol: float = 1e-4,
                   workers: int = 1, seed: int = 0):
    """Solve the ensemble-optimal pulse and propagate every member with it.

    Returns ``(extremal, bundle)``.
    """
    from .pmp import CostFunctional, ShootingProblem, build_extremal, solve_shooting

    tag = "ensemble-linear" if spec.tag == "linear" else "ensemble-zt"
    sp = ShootingProblem(cost=CostFunctional(tag, inhom=spec), t_i=t_i, t_f=t_f)
    cfg = cfg or IntegratorConfig()
    ex = solve_shooting(sp, guesses, tol, cfg, workers=workers, seed=seed)
    full = build_extremal(sp, ex.p_initial, cfg, residual=ex.residual, iterations=ex.iterations,
                          guess_index=ex.guess_index, members=list(members))
    return full, ensemble_bundle(full, members, spec)


# ---------------------------------------------------------------------------
# Stability maps
# ---------------------------------------------------------------------------

STABILITY_AXES = ("A", "k", "w")


@dataclass
class StabilityMap:
    """Probe-time detuning ``delta*(t_probe; z)`` over (parameter, z).

    ``values[i, j]`` belongs to ``params[i]`` and ``z[j]``; rows whose shooting
    failed are NaN. A row is stable when its cross-z spread is strictly below
    ``threshold_fraction * max_t |delta*|``.
    """

    axis: str
    params: np.ndarray
    z: np.ndarray
    values: np.ndarray
    spread: np.ndarray
    thresholds: np.ndarray
    operating_value: float
    probe_time: float
    threshold_fraction: float
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def stable(self) -> np.ndarray:
        return (~self.failed) & (self.spread < self.thresholds)

    @property
    def acceptance_interval(self) -> Optional[tuple[float, float]]:
        """Largest run of stable parameter values containing the operating point.

        Falls back to the longest stable run when the operating point itself is
        unstable; None if no value is stable.
        """
        ok = self.stable
        if not ok.any():
            return None
        runs = []
        i = 0
        while i < len(ok):
            if ok[i]:
                j = i
                while j + 1 < len(ok) and ok[j + 1]:
                    j += 1
                runs.append((i, j))
                i = j + 1
            else:
                i += 1
        op = int(np.argmin(np.abs(self.params - self.operating_value)))
        chosen = next((r for r in runs if r[0] <= op <= r[1]), None)
        if chosen is None:
            chosen = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
        return float(self.params[chosen[0]]), float(self.params[chosen[1]])

    def is_interior(self, physical_bounds: Sequence[float] = ()) -> bool:
        """True if the acceptance interval is bounded by critical values inside the scan.

        An interval end that coincides with a scan end counts as interior only
        when it is listed in ``physical_bounds`` (e.g. ``A = 0``).
        """
        iv = self.acceptance_interval
        if iv is None:
            return False
        lo, hi = iv
        pmin, pmax = float(self.params[0]), float(self.params[-1])
        if lo == pmin and hi == pmax:
            return False
        lo_ok = lo > pmin or any(np.isclose(lo, b) for b in physical_bounds)
        hi_ok = hi < pmax or any(np.isclose(hi, b) for b in physical_bounds)
        return bool(lo_ok and hi_ok)

    def summary(self) -> dict:
        iv = self.acceptance_interval
        return {"axis": self.axis, "threshold": self.threshold_fraction,
                "acceptance_interval": None if iv is None else list(iv),
                "probe_time": self.probe_time, "operating_value": self.operating_value,
                "failed_cells": int(self.failed.sum()), "n_params": int(len(self.params))}

    def export(self, out_dir, stem: Optional[str] = None) -> list[Path]:
        from .landscape import write_matrix_csv

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or f"stability_{self.axis}"
        csv_path = write_matrix_csv(out_dir / f"{stem}.csv", self.axis, self.params, "z",
                                    self.z, self.values)
        js = out_dir / f"{stem}.json"
        js.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return [csv_path, js]


def _probe_row(extremal, pert, z, probe):
    i = int(np.argmin(np.abs(extremal.times - probe)))
    if abs(extremal.times[i] - probe) > 1e-9 * max(1.0, probe):
        raise ValueError("probe time not on the output grid")
    l3 = extremal.l[:, 2]
    row = optimal_stark_zt(probe, z, l3[i], pert)
    ref = optimal_stark_zt(extremal.times, pert.z_min, l3, pert)
    return row, float(np.max(np.abs(ref)))


def stability_map(axis: str, values: Sequence[float], base: SpaceTimePerturbation = SpaceTimePerturbation(),
                  *, z: Optional[Sequence[float]] = None, probe: Optional[float] = None,
                  threshold: float = 0.05, cfg: Optional[IntegratorConfig] = None,
                  tol: float = 1e-4, seed: int = 0) -> StabilityMap:
    """Scan one perturbation parameter and record ``delta*(t_probe; z)``.

    For every parameter value the ensemble-zt extremal is re-solved. The scan
    marches outward from the value nearest the operating point and seeds each
    solve with its neighbour's solution, falling back to the guess ladder, so
    the rows stay on one solution branch.

    Parameters
    ----------
    axis : {"A", "k", "w"}
    values : sequence of float
        Increasing parameter values.
    base : SpaceTimePerturbation
        Operating point; the other two parameters are held here.
    z : sequence of float, optional
        Positions; defaults to 11 points across the window.
    probe : float, optional
        Probe time; defaults to ``t_i + 0.4 (t_f - t_i)``.
    threshold : float
        Stability threshold as a fraction of ``max_t |delta*|``.
    """
    from .pmp import CostFunctional, ShootingFailure, ShootingProblem, guess_ladder, solve_shooting

    if axis not in STABILITY_AXES:
        raise ValueError(f"axis must be one of {STABILITY_AXES}")
    params = np.asarray(values, dtype=float)
    if params.ndim != 1 or len(params) == 0:
        raise ValueError("need at least one parameter value")
    if np.any(np.diff(params) <= 0):
        raise ValueError("parameter values must be strictly increasing")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    z = np.linspace(base.z_min, base.z_max, 11) if z is None else np.asarray(z, dtype=float)
    probe = base.t_i + 0.4 * base.span if probe is None else float(probe)
    cfg = cfg or IntegratorConfig()
    # the probe must be a sample of the output grid
    grid = np.linspace(base.t_i, base.t_f, cfg.n_samples)
    if not np.any(np.isclose(grid, probe, rtol=0, atol=1e-9 * max(1.0, abs(probe)))):
        n = cfg.n_samples
        while not np.any(np.isclose(np.linspace(base.t_i, base.t_f, n), probe, rtol=0,
                                    atol=1e-9 * max(1.0, abs(probe)))) and n < 100 * cfg.n_samples:
            n += 1
        cfg = IntegratorConfig(cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.method, n, cfg.max_steps)

    op_value = getattr(base, axis)
    op = int(np.argmin(np.abs(params - op_value)))
    order = [op] + [i for pair in zip(range(op + 1, len(params)), range(op - 1, -1, -1))
                    for i in pair]
    order += [i for i in range(len(params)) if i not in order]
    ladder = guess_ladder(seed=seed)

    n = len(params)
    vals = np.full((n, len(z)), np.nan)
    spread = np.full(n, np.nan)
    thr = np.full(n, np.nan)
    failed = np.zeros(n, dtype=bool)
    solved: dict[int, np.ndarray] = {}
    for i in order:
        pert = base.replace(**{axis: float(params[i])})
        sp = ShootingProblem(cost=CostFunctional("ensemble-zt", inhom=pert), t_i=base.t_i,
                             t_f=base.t_f)
        seeds = [solved[j] for j in (i - 1, i + 1) if j in solved]
        try:
            ex = solve_shooting(sp, seeds + ladder, tol, cfg, seed=seed)
        except ShootingFailure as exc:
            log.warning("stability %s=%g: %s", axis, params[i], exc)
            failed[i] = True
            continue
        solved[i] = ex.p_initial
        row, dmax = _probe_row(ex, pert, z, probe)
        vals[i] = row
        spread[i] = float(np.max(row) - np.min(row))
        thr[i] = threshold * dmax
    return StabilityMap(axis, params, z, vals, spread, thr, float(op_value), probe, threshold,
                        failed)


def acceptance_box(maps: Sequence[StabilityMap]) -> dict:
    """Per-axis acceptance intervals; their product is the acceptance box."""
    return {m.axis: m.acceptance_interval for m in maps}
