"""Efficiency and adiabaticity landscapes over the reduced (tau, sigma) plane.

The Stark pulse is placed at reduced coordinates ``tau = (t_s - t_p)/t_p`` and
``sigma = sigma_s/sigma_p`` with the pump held fixed. Maps are evaluated at a
probe time ``T`` (default ``t_p + 3 sigma_p``).

Critical-point curves
---------------------
In the adiabatic limit ``P2(T) = cos^2 theta(T)`` and ``dP2/dt_s = 0`` reduces
to ``delta(T) = 0``. Solving for ``t_s`` gives

    t_s = T +- sqrt(2 sigma_s^2 ln(Delta0 / (sqrt(2 pi) S0 sigma_s))),

real only while the log argument exceeds one. The second family follows from
``dP2/dsigma_s = 0``, i.e. ``sigma_s = |T - t_s|``. Both meet where
``ln(Delta0 / (sqrt(2 pi) S0 sigma_s)) = 1/2`` and, degenerately, at
``sigma_s = 0``.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _rk, _systems
from .dynamics import IntegratorConfig, _fmt
from .model import (SQRT_2PI, ConicalIntersectionError, ControlSample, PulseParams,
                    adiabaticity, gaussian_pump, gaussian_sample, gaussian_stark, mixing_angle)

log = logging.getLogger(__name__)

MEASURES = ("adiabatic-P2", "full-Pa", "full-Pb", "AD")


@dataclass(frozen=True)
class GridSpec:
    """Uniform (tau, sigma) grid."""

    tau_min: float = -0.5
    tau_max: float = 1.0
    n_tau: int = 121
    sigma_min: float = 0.05
    sigma_max: float = 6.0
    n_sigma: int = 121

    def __post_init__(self):
        if self.n_tau < 1 or self.n_sigma < 1:
            raise ValueError("grid must have at least one cell per axis")
        if self.tau_max < self.tau_min or self.sigma_max < self.sigma_min:
            raise ValueError("grid bounds are reversed")
        if self.sigma_min <= 0:
            raise ValueError("sigma axis must stay above zero")

    @property
    def tau_axis(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.n_tau)

    @property
    def sigma_axis(self) -> np.ndarray:
        return np.linspace(self.sigma_min, self.sigma_max, self.n_sigma)


@dataclass
class GridMap:
    """Scalar field ``values[i, j]`` at ``sigma_axis[i]``, ``tau_axis[j]``.

    Missing (singular or failed) cells are NaN.
    """

    tau_axis: np.ndarray
    sigma_axis: np.ndarray
    values: np.ndarray
    probe_time: float
    measure: str
    params: Optional[PulseParams] = None
    t_i: float = 0.0

    def __post_init__(self):
        if self.values.shape != (len(self.sigma_axis), len(self.tau_axis)):
            raise ValueError("values shape does not match the axes")

    def argmax(self) -> dict:
        """Best cell and a local quadratic refinement.

        Ties resolve to the smallest sigma (then smallest tau). The refined
        location is the vertex of the parabola through the best cell and its
        two neighbours along each axis, limited to half a cell.
        """
        v = self.values
        if np.all(np.isnan(v)):
            raise ValueError("map has no valid cells")
        i, j = np.unravel_index(np.nanargmax(v), v.shape)
        tau = _refine(self.tau_axis, v[i, :], j)
        sig = _refine(self.sigma_axis, v[:, j], i)
        return {"tau": float(tau), "sigma": float(sig), "value": float(v[i, j]),
                "cell": [int(i), int(j)], "cell_tau": float(self.tau_axis[j]),
                "cell_sigma": float(self.sigma_axis[i])}

    def sidecar(self) -> dict:
        out = {"measure": self.measure, "probe_time": float(self.probe_time), "t_i": self.t_i,
               "params": None if self.params is None else asdict(self.params),
               "shape": list(self.values.shape),
               "missing_cells": int(np.isnan(self.values).sum())}
        try:
            out["argmax"] = self.argmax()
        except ValueError:
            out["argmax"] = None
        return out

    def export(self, out_dir, stem: Optional[str] = None) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.measure
        path = write_matrix_csv(out_dir / f"{stem}.csv", "sigma", self.sigma_axis, "tau",
                                self.tau_axis, self.values)
        js = out_dir / f"{stem}.json"
        js.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return [path, js]

    @classmethod
    def from_csv(cls, path, measure: str = "", probe_time: float = np.nan) -> "GridMap":
        row_name, rows, col_name, cols, values = read_matrix_csv(path)
        return cls(cols, rows, values, probe_time, measure)


def _refine(axis, line, k):
    if k == 0 or k == len(axis) - 1:
        return axis[k]
    y0, y1, y2 = line[k - 1], line[k], line[k + 1]
    if not np.all(np.isfinite([y0, y1, y2])):
        return axis[k]
    den = y0 - 2.0 * y1 + y2
    if den >= 0:
        return axis[k]
    h = axis[k + 1] - axis[k]
    shift = 0.5 * (y0 - y2) / den
    return axis[k] + float(np.clip(shift, -0.5, 0.5)) * h


def write_matrix_csv(path, row_name: str, rows, col_name: str, cols, values) -> Path:
    """CSV matrix whose first row holds ``row_name\\col_name`` and the column axis."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{row_name}\\{col_name}"] + [_fmt(c) for c in cols])
        for r, line in zip(rows, values):
            w.writerow([_fmt(r)] + [_fmt(x) for x in line])
    return path


def read_matrix_csv(path):
    with Path(path).open(newline="") as fh:
        body = list(csv.reader(fh))
    row_name, col_name = body[0][0].split("\\")
    cols = np.array([float(x) for x in body[0][1:]])
    rows = np.array([float(r[0]) for r in body[1:]])
    values = np.array([[float(x) for x in r[1:]] for r in body[1:]]).reshape(len(rows), len(cols))
    return row_name, rows, col_name, cols, values


# ---------------------------------------------------------------------------
# Pointwise measures
# ---------------------------------------------------------------------------

def p2_adiabatic(T: float, tau: float, sigma: float, p: PulseParams = PulseParams()) -> float:
    """Adiabatic-limit population ``cos^2 theta(T)`` of state |2>."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    q = p.with_reduced(tau, sigma)
    s = ControlSample(gaussian_stark(T, q), gaussian_pump(T, q))
    return float(np.cos(mixing_angle(s)) ** 2)


def max_adiabaticity(tau: float, sigma: float, p: PulseParams = PulseParams(),
                     t_i: float = 0.0, T: Optional[float] = None, n: int = 4001) -> float:
    """``max AD(t)`` on ``[t_i, T]``.

    Uniform samples miss the spike at a resonance crossing with a weak pump,
    whose height is ``|ddelta/dt| / (2 omega^2)`` and width ``~ omega / |ddelta/dt|``.
    The crossings are known in closed form, so each one inside the window is
    also sampled densely on that width.
    """
    T = p.probe_time() if T is None else T
    q = p.with_reduced(tau, sigma)
    t = [np.linspace(t_i, T, n)]
    for tc in saddle_curve_ts(q.sigma_s, q.t_s, q) or ():
        if t_i <= tc <= T:
            s = gaussian_sample(tc, q)
            width = 10.0 * float(s.omega) / max(abs(float(s.ddelta_dt)), 1e-300)
            local = tc + width * np.linspace(-1.0, 1.0, 401)
            t.append(np.clip(local, t_i, T))
    t = np.concatenate(t)
    return float(np.max(adiabaticity(gaussian_sample(t, q))))


def saddle_curve_ts(sigma_s: float, T: float, p: PulseParams = PulseParams()):
    """Stark centres ``(t_minus, t_plus)`` that put resonance at ``T``; None if there are none."""
    if not sigma_s > 0:
        raise ValueError("sigma_s must be positive")
    arg = p.Delta0 / (SQRT_2PI * p.S0 * sigma_s)
    if arg < 1.0 - 1e-12:
        return None
    # the double root at arg = 1 must survive rounding
    half = np.sqrt(2.0 * sigma_s ** 2 * max(np.log(arg), 0.0))
    return T - half, T + half


def saddle_curve_sigma(t_s: float, T: float):
    """``(|T - t_s|, -|T - t_s|)``; only the first is physical."""
    d = abs(T - t_s)
    return d, -d


@dataclass(frozen=True)
class CriticalPoint:
    tau: float
    sigma: float
    kind: str  # "intersection" or "rejected-degenerate"

    def as_dict(self) -> dict:
        return {"tau": self.tau, "sigma": self.sigma, "kind": self.kind}


def critical_points(T: Optional[float] = None, p: PulseParams = PulseParams(),
                    tau_range=(-0.5, 1.0), sigma_range=(0.0, 6.0), n_scan: int = 2000,
                    xtol: float = 1e-12) -> list[CriticalPoint]:
    """Intersections of the two saddle-curve families inside a (tau, sigma) window.

    Along each branch of ``t_s(sigma_s)`` the difference
    ``g(sigma_s) = |T - t_s(sigma_s)| - sigma_s`` is scanned for sign changes
    and each bracket is refined with Brent's method. The ``sigma = 0`` limit,
    where both families meet at ``t_s = T``, is always reported as
    ``rejected-degenerate`` (when ``tau_T`` lies in the window) since it is a
    limit of both families rather than a cell of the window.
    """
    T = p.probe_time() if T is None else T
    a = p.Delta0 / (SQRT_2PI * p.S0)
    s_lo = max(sigma_range[0] * p.sigma_p, 0.0)
    s_hi = min(sigma_range[1] * p.sigma_p, a)
    pts = []

    def in_tau(tau):
        return tau_range[0] - 1e-12 <= tau <= tau_range[1] + 1e-12

    if in_tau((T - p.t_p) / p.t_p):
        pts.append(CriticalPoint((T - p.t_p) / p.t_p, 0.0, "rejected-degenerate"))
    if s_hi > s_lo and a > 0:
        def g(s):
            # |T - t_s| - sigma_s on either branch
            return np.sqrt(2.0 * s * s * np.log(a / s)) - s

        grid = np.linspace(max(s_lo, 1e-9 * s_hi), s_hi * (1 - 1e-12), n_scan)
        vals = np.array([g(s) for s in grid])
        roots = []
        for k in range(len(grid) - 1):
            if vals[k] == 0.0:
                roots.append(grid[k])
            elif vals[k] * vals[k + 1] < 0:
                roots.append(brentq(g, grid[k], grid[k + 1], xtol=xtol))
        for s in roots:
            lo, hi = saddle_curve_ts(s, T, p)
            for ts in (lo, hi):
                tau = (ts - p.t_p) / p.t_p
                if in_tau(tau):
                    pts.append(CriticalPoint(float(tau), float(s / p.sigma_p), "intersection"))
    return sorted(pts, key=lambda c: (c.sigma, c.tau))


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

def _full_cell(prm, t_i, T, cfg):
    y0 = np.array([0.0, 0.0, -1.0, 0.0])
    hmax = min(cfg.max_step, 0.5 * min(prm[3], prm[4]))
    status, y_out, _, _, _ = _rk.dp45(_systems.BLOCH_GAUSS, prm, y0, t_i, T, cfg.rel_tol,
                                      cfg.abs_tol, hmax, 0.0, np.array([T]), cfg.max_steps)
    if status != _rk.OK:
        return np.nan, np.nan
    return 0.5 * (1.0 + y_out[0, 2]), y_out[0, 3] / (T - t_i)


def _full_rows(args):
    sigmas, taus, p, t_i, T, cfg = args
    pa = np.empty((len(sigmas), len(taus)))
    pb = np.empty_like(pa)
    for i, s in enumerate(sigmas):
        for j, tau in enumerate(taus):
            prm = p.with_reduced(tau, s).as_array()
            pa[i, j], pb[i, j] = _full_cell(prm, t_i, T, cfg)
    return pa, pb


def full_maps(grid: GridSpec = GridSpec(), p: PulseParams = PulseParams(),
              cfg: Optional[IntegratorConfig] = None, T: Optional[float] = None,
              t_i: float = 0.0, workers: int = 1) -> tuple[GridMap, GridMap]:
    """Both full-dynamics maps from one integration per cell.

    Each cell integrates the Bloch equations from the south pole at ``t_i`` to
    ``T``; values at ``T`` do not depend on the dynamics after it. Returns
    ``(P^a, P^b)`` with ``P^b`` normalised by ``T - t_i``.
    """
    cfg = cfg or IntegratorConfig()
    T = p.probe_time() if T is None else float(T)
    if not T > t_i:
        raise ValueError("probe time must exceed t_i")
    taus, sigmas = grid.tau_axis, grid.sigma_axis
    chunks = [sigmas[i:i + 1] for i in range(len(sigmas))]
    jobs = [(c, taus, p, t_i, T, cfg) for c in chunks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_full_rows, jobs))
    else:
        parts = [_full_rows(j) for j in jobs]
    pa = np.vstack([a for a, _ in parts])
    pb = np.vstack([b for _, b in parts])
    return (GridMap(taus, sigmas, pa, T, "full-Pa", p, t_i),
            GridMap(taus, sigmas, pb, T, "full-Pb", p, t_i))


def _adiabatic_values(grid, p, T, fn):
    taus, sigmas = grid.tau_axis, grid.sigma_axis
    out = np.full((len(sigmas), len(taus)), np.nan)
    for i, s in enumerate(sigmas):
        for j, tau in enumerate(taus):
            try:
                out[i, j] = fn(gaussian_sample(T, p.with_reduced(tau, s)))
            except ConicalIntersectionError:
                pass
    return out


def efficiency_map(measure: str = "full-Pa", grid: GridSpec = GridSpec(),
                   p: PulseParams = PulseParams(), cfg: Optional[IntegratorConfig] = None,
                   T: Optional[float] = None, t_i: float = 0.0, workers: int = 1) -> GridMap:
    """Population-transfer efficiency over the (tau, sigma) grid.

    Parameters
    ----------
    measure : {"adiabatic-P2", "full-Pa", "full-Pb"}
        ``cos^2 theta(T)``, ``(1 + R3(T))/2`` or the time-averaged population
        ``int_{t_i}^T (1 + R3)/2 dt / (T - t_i)``.
    """
    T = p.probe_time() if T is None else float(T)
    if measure == "adiabatic-P2":
        vals = _adiabatic_values(grid, p, T, lambda s: np.cos(mixing_angle(s)) ** 2)
        return GridMap(grid.tau_axis, grid.sigma_axis, vals, T, measure, p, t_i)
    if measure not in ("full-Pa", "full-Pb"):
        raise ValueError(f"unknown efficiency measure {measure!r}")
    pa, pb = full_maps(grid, p, cfg, T, t_i, workers)
    return pa if measure == "full-Pa" else pb


def adiabaticity_map(T: Optional[float] = None, grid: GridSpec = GridSpec(),
                     p: PulseParams = PulseParams()) -> GridMap:
    """``AD(T)`` per cell from analytic pulse derivatives; singular cells are NaN."""
    T = p.probe_time() if T is None else float(T)
    vals = _adiabatic_values(grid, p, T, adiabaticity)
    return GridMap(grid.tau_axis, grid.sigma_axis, vals, T, "AD", p)
