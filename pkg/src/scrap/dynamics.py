"""Time integration of the Bloch and state-costate systems.

The default integrator is an adaptive Dormand-Prince 5(4) pair with
4th-order dense output; a classical fixed-step RK4 is kept for
convergence-order studies. Built-in fields and extremal systems run in
compiled code (:mod:`scrap._rk`); :class:`~scrap.fields.FunctionField` runs
through scipy's RK45, which is the same Dormand-Prince pair.

The norm of the Bloch vector is never renormalised; its drift is recorded on
every trajectory as a diagnostic.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import _rk
from .fields import ControlField
from .model import ScrapError, adiabaticity, is_degenerate

log = logging.getLogger(__name__)


class IntegrationError(ScrapError, RuntimeError):
    pass


class StiffnessError(IntegrationError):
    """Step size underflow."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 1.0
    method: str = "dp45"  # or "rk4" (fixed step = max_step)
    n_samples: int = 1001
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.method not in ("dp45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")


@dataclass
class Trajectory:
    """Sampled solution. ``states`` has shape (N, 3)."""

    times: np.ndarray
    states: np.ndarray
    costates: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        n = len(self.times)
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for name in ("states", "costates", "delta", "omega"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ValueError(f"{name} has {len(v)} rows, expected {n}")

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def angular_momentum(self) -> Optional[np.ndarray]:
        if self.costates is None:
            return None
        return np.cross(self.states, self.costates)

    # -- CSV ---------------------------------------------------------------

    def columns(self, extra: Optional[dict] = None) -> dict:
        cols = {"t": self.times, "r1": self.states[:, 0], "r2": self.states[:, 1],
                "r3": self.states[:, 2]}
        if self.costates is not None:
            cols.update(p1=self.costates[:, 0], p2=self.costates[:, 1], p3=self.costates[:, 2])
        if self.delta is not None:
            cols.update(delta=self.delta, omega=self.omega)
        if "AD" in self.extras:
            cols["AD"] = self.extras["AD"]
        if extra:
            cols.update(extra)
        return cols

    def to_csv(self, path, extra: Optional[dict] = None) -> Path:
        """Write ``t,r1,r2,r3[,p1,p2,p3,delta,omega,AD][,extra...]``."""
        return write_columns_csv(path, self.columns(extra))

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        cols = read_columns_csv(path)
        states = np.column_stack([cols["r1"], cols["r2"], cols["r3"]])
        costates = (np.column_stack([cols["p1"], cols["p2"], cols["p3"]])
                    if "p1" in cols else None)
        extras = {"AD": cols["AD"]} if "AD" in cols else {}
        return cls(cols["t"], states, costates, cols.get("delta"), cols.get("omega"), extras)


def _fmt(x: float) -> str:
    # shortest repr that round-trips
    return repr(float(x))


def write_columns_csv(path, cols: dict) -> Path:
    path = Path(path)
    names = list(cols)
    data = [np.asarray(cols[k], dtype=float) for k in names]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_fmt(v) for v in row])
    return path


def read_columns_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    arr = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------------------
# Core runners
# ---------------------------------------------------------------------------

def _output_grid(t_i, t_f, cfg, t_eval):
    if t_eval is None:
        return np.linspace(t_i, t_f, cfg.n_samples)
    t_eval = np.asarray(t_eval, dtype=float)
    lo, hi = min(t_i, t_f), max(t_i, t_f)
    if np.any(t_eval < lo - 1e-12) or np.any(t_eval > hi + 1e-12):
        raise ValueError("t_eval outside integration window")
    return t_eval


def run_compiled(kind: int, prm: np.ndarray, y0, t_i: float, t_f: float,
                 cfg: IntegratorConfig, t_out: np.ndarray, max_step: float = np.inf):
    """Integrate a built-in system; returns ``(y_out, stats)``."""
    y0 = np.ascontiguousarray(y0, dtype=float)
    t_out = np.ascontiguousarray(t_out, dtype=float)
    hmax = float(min(cfg.max_step, max_step))
    if cfg.method == "rk4":
        if t_out[0] != t_i:
            t_out = np.concatenate([[t_i], t_out])
            y_out = _rk.rk4(kind, prm, y0, t_out, hmax)[1:]
        else:
            y_out = _rk.rk4(kind, prm, y0, t_out, hmax)
        return y_out, {"method": "rk4", "step": hmax}
    status, y_out, _, n_acc, n_rej = _rk.dp45(kind, prm, y0, float(t_i), float(t_f),
                                              cfg.rel_tol, cfg.abs_tol, hmax, 0.0, t_out,
                                              cfg.max_steps)
    if status == _rk.STEP_UNDERFLOW:
        raise StiffnessError(f"step size underflow integrating system {kind} on [{t_i}, {t_f}]")
    if status == _rk.TOO_MANY_STEPS:
        raise IntegrationError(f"exceeded {cfg.max_steps} steps on [{t_i}, {t_f}]")
    return y_out, {"method": "dp45", "n_accepted": int(n_acc), "n_rejected": int(n_rej)}


def _run_python(fun: Callable, y0, t_i, t_f, cfg, t_out, max_step):
    hmax = float(min(cfg.max_step, max_step))
    if cfg.method == "rk4":
        ts = t_out if t_out[0] == t_i else np.concatenate([[t_i], t_out])
        y = np.asarray(y0, dtype=float)
        out = [y]
        for a, b in zip(ts[:-1], ts[1:]):
            m = max(1, int(np.ceil(abs(b - a) / hmax - 1e-12)))
            h = (b - a) / m
            t = a
            for _ in range(m):
                k1 = fun(t, y)
                k2 = fun(t + h / 2, y + h / 2 * k1)
                k3 = fun(t + h / 2, y + h / 2 * k2)
                k4 = fun(t + h, y + h * k3)
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            out.append(y)
        out = np.array(out)
        return (out if t_out[0] == t_i else out[1:]), {"method": "rk4", "step": hmax}
    sol = solve_ivp(fun, (t_i, t_f), np.asarray(y0, dtype=float), method="RK45",
                    t_eval=t_out, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    max_step=hmax if np.isfinite(hmax) else np.inf)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y.T, {"method": "dp45-scipy", "nfev": int(sol.nfev)}


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def integrate_bloch(field: ControlField, r0, t_i: float, t_f: float,
                    cfg: Optional[IntegratorConfig] = None, t_eval=None) -> Trajectory:
    """Solve ``dR/dt = w(t) x R`` from ``r0`` at ``t_i`` to ``t_f``.

    Parameters
    ----------
    field : ControlField
        Supplies ``delta(t)`` and ``omega(t)``.
    r0 : array_like, shape (3,)
        Initial Bloch vector, unit norm.
    t_i, t_f : float
        Integration window. ``t_f < t_i`` integrates backwards.
    cfg : IntegratorConfig, optional
    t_eval : array_like, optional
        Output times ordered in the direction of integration. Defaults to a
        uniform grid of ``cfg.n_samples`` points.

    Returns
    -------
    Trajectory
        States, sampled controls, ``extras["p2_integral"]`` (running integral
        of ``(1 + r3)/2``) and ``extras["AD"]`` where the adiabaticity function
        is defined (NaN at the conical intersection).
    """
    cfg = cfg or IntegratorConfig()
    r0 = np.asarray(r0, dtype=float)
    if abs(np.linalg.norm(r0) - 1.0) > 1e-9:
        raise ValueError(f"initial Bloch vector must have unit norm, got {np.linalg.norm(r0)}")
    if t_f == t_i:
        raise ValueError("empty integration window")
    t_out = _output_grid(t_i, t_f, cfg, t_eval)
    y0 = np.concatenate([r0, [0.0]])
    compiled = field.compiled()
    if compiled is not None:
        kind, prm = compiled
        y_out, stats = run_compiled(kind, prm, y0, t_i, t_f, cfg, t_out, field.max_step_hint)
    else:
        def fun(t, y):
            s = field.sample(t)
            d, o = float(s.delta), float(s.omega)
            return np.array([-d * y[1], d * y[0] - o * y[2], o * y[1], 0.5 * (1 + y[2])])
        y_out, stats = _run_python(fun, y0, t_i, t_f, cfg, t_out, field.max_step_hint)

    if t_f < t_i:
        order = slice(None, None, -1)
        t_out, y_out = t_out[order], y_out[order]
    s = field.sample(t_out)
    extras = {"p2_integral": y_out[:, 3] * np.sign(t_f - t_i)}
    if s.ddelta_dt is not None and s.domega_dt is not None:
        sing = is_degenerate(s)
        ad = np.full(len(t_out), np.nan)
        if np.any(~sing):
            ok = ~sing
            ad[ok] = adiabaticity(type(s)(s.delta[ok], s.omega[ok], s.ddelta_dt[ok], s.domega_dt[ok]))
        extras["AD"] = ad
    traj = Trajectory(t_out, y_out[:, :3], None, np.asarray(s.delta, float),
                      np.asarray(s.omega, float), extras, stats)
    drift = traj.norm_drift
    stats["norm_drift"] = drift
    if cfg.method == "dp45" and drift > 10 * cfg.rel_tol * max(1.0, abs(t_f - t_i)):
        log.warning("norm drift %.3g exceeds tolerance budget", drift)
    return traj


@dataclass
class ExtremalSystem:
    """A compiled state-costate system plus its control law.

    ``controls(t, Y)`` and ``hamiltonian(t, Y)`` take the full sampled state
    array ``Y`` (rows are times) and return arrays.
    """

    kind: int
    prm: np.ndarray
    controls: Callable
    hamiltonian: Callable
    tag: str = ""
    n_aux: int = 0
    autonomous: bool = True
    max_step_hint: float = np.inf


def integrate_extremal(system: ExtremalSystem, r0, p0, t_i: float, t_f: float,
                       cfg: Optional[IntegratorConfig] = None, t_eval=None,
                       aux0=None) -> Trajectory:
    """Integrate the coupled state-costate system ``dR/dt = w x R``, ``dp/dt = w x p``.

    The trajectory records the realised controls and, in ``extras``, the
    angular momentum ``l = R x p`` (key ``"l"``), ``l_sq``, the pseudo-Hamiltonian
    ``H`` and any auxiliary state columns (``"aux"``).
    """
    cfg = cfg or IntegratorConfig()
    r0 = np.asarray(r0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if not np.all(np.isfinite(p0)):
        raise ValueError("initial costate must be finite")
    aux0 = np.zeros(system.n_aux) if aux0 is None else np.asarray(aux0, dtype=float)
    if len(aux0) != system.n_aux:
        raise ValueError(f"system {system.tag!r} expects {system.n_aux} auxiliary states")
    t_out = _output_grid(t_i, t_f, cfg, t_eval)
    y0 = np.concatenate([r0, p0, aux0])
    Y, stats = run_compiled(system.kind, system.prm, y0, t_i, t_f, cfg, t_out,
                            system.max_step_hint)
    if t_f < t_i:
        t_out, Y = t_out[::-1], Y[::-1]
    delta, omega = system.controls(t_out, Y)
    l = np.cross(Y[:, 0:3], Y[:, 3:6])
    extras = {"l": l, "l_sq": np.sum(l * l, axis=1), "H": system.hamiltonian(t_out, Y),
              "aux": Y[:, 6:]}
    traj = Trajectory(t_out, Y[:, 0:3], Y[:, 3:6], delta, omega, extras, stats)
    stats["norm_drift"] = traj.norm_drift
    return traj


def conservation_report(traj: Trajectory) -> dict:
    """Maximum absolute drift of each conserved quantity along ``traj``.

    Keys: ``norm_drift`` always; ``H_drift``, ``l2_drift``, ``lsq_drift`` and
    ``p_norm_drift`` when the trajectory carries costates.
    """
    rep = {"norm_drift": traj.norm_drift}
    if traj.costates is None:
        return rep

    def drift(x):
        x = np.asarray(x, dtype=float)
        return float(np.max(np.abs(x - x[0])))

    l = traj.extras.get("l")
    if l is None:
        l = traj.angular_momentum
    rep["l2_drift"] = drift(l[:, 1])
    rep["lsq_drift"] = drift(np.sum(l * l, axis=1))
    rep["p_norm_drift"] = drift(np.linalg.norm(traj.costates, axis=1))
    if "H" in traj.extras:
        rep["H_drift"] = drift(traj.extras["H"])
    return rep
