"""Pontryagin maximum principle for SCRAP control.

The Bloch dynamics ``dR/dt = w x R`` with ``w = (omega, 0, delta)`` give the
pseudo-Hamiltonian

    H = l1 * omega + l3 * delta + p0 * r(delta, omega, t),    l = R x p,

with ``p0 = -1/2``. Maximising ``H`` in the controls yields feedback laws in
``l``; substituted back, the state and costate both rotate about ``w``:
``dR/dt = w x R``, ``dp/dt = w x p``. The fixed-endpoint problem
(south pole to north pole) is solved by shooting on the initial costate.

Cost tags
---------
``energy``              r = delta^2 + omega^2           delta = l3, omega = l1
``fixed-pump-energy``   Gaussian omega, r = delta^2+..  delta = l3
``ensemble-linear``     r = c_delta delta^2 + Z omega^2 delta = l3/c_delta, omega = l1/Z
``ensemble-zt``         z-integrated space-time cost    see :mod:`scrap.inhomogeneity`
``mixed-adiabatic``     r = ddelta omega - domega delta + delta^2 + omega^2
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import _systems
from .dynamics import (ExtremalSystem, IntegrationError, IntegratorConfig, Trajectory,
                       conservation_report, integrate_extremal)
from .fields import SampledField
from .model import NORTH_POLE, SOUTH_POLE, ControlSample, PulseParams, ScrapError, gaussian_pump

log = logging.getLogger(__name__)

P0 = -0.5
COST_TAGS = ("energy", "fixed-pump-energy", "ensemble-linear", "ensemble-zt", "mixed-adiabatic")


class ShootingFailure(ScrapError, RuntimeError):
    """All shooting attempts failed; ``diagnostics`` holds one dict per guess."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class CostFunctional:
    """Running cost selector.

    ``inhom`` carries the perturbation for the ensemble tags and ``pump`` the
    fixed pump pulse for ``fixed-pump-energy``.
    """

    tag: str = "energy"
    inhom: object = None
    pump: Optional[PulseParams] = None

    def __post_init__(self):
        if self.tag not in COST_TAGS:
            raise ValueError(f"unsupported cost tag {self.tag!r}; expected one of {COST_TAGS}")
        if self.tag.startswith("ensemble") and self.inhom is None:
            raise ValueError(f"cost {self.tag!r} needs a perturbation spec")

    @property
    def p0(self) -> float:
        return P0

    @property
    def pump_params(self) -> PulseParams:
        return self.pump or PulseParams()


def running_cost(cost: CostFunctional, s: ControlSample, t=None):
    """Integrand ``r`` of the cost functional at control sample ``s``."""
    d = np.asarray(s.delta, dtype=float)
    o = np.asarray(s.omega, dtype=float)
    if cost.tag in ("energy", "fixed-pump-energy"):
        return d ** 2 + o ** 2
    if cost.tag == "ensemble-linear":
        from .inhomogeneity import ensemble_cost_coeff_linear
        return ensemble_cost_coeff_linear(cost.inhom) * d ** 2 + cost.inhom.Z * o ** 2
    if cost.tag == "ensemble-zt":
        from .inhomogeneity import zt_moments
        pert = cost.inhom
        f = pert.f(t)
        base = d / (1.0 + f * pert.eps(pert.z_min))
        _, i2 = zt_moments(t, pert)
        return i2 * base ** 2 + pert.Z * o ** 2
    # mixed-adiabatic
    if s.ddelta_dt is None or s.domega_dt is None:
        raise ValueError("mixed-adiabatic cost needs control derivatives")
    return s.ddelta_dt * o - s.domega_dt * d + d ** 2 + o ** 2


def pseudo_hamiltonian(r, p, s: ControlSample, cost: CostFunctional = CostFunctional(), t=None):
    """``H = l1 omega + l3 delta + p0 r(alpha, t)`` with ``l = r x p``.

    For the energy tag this is ``l1 omega + l3 delta - (delta^2 + omega^2)/2``.
    """
    l = np.cross(np.asarray(r, dtype=float), np.asarray(p, dtype=float))
    if cost.tag == "mixed-adiabatic":
        # on the singular arc q.u cancels the derivative part of p0*r
        rc = np.asarray(s.delta) ** 2 + np.asarray(s.omega) ** 2
    else:
        rc = running_cost(cost, s, t)
    return l[..., 0] * s.omega + l[..., 2] * s.delta + P0 * rc


def optimal_fields_energy(l) -> ControlSample:
    """Stationary controls of the energy cost: ``delta = l3``, ``omega = l1``."""
    l = np.asarray(l, dtype=float)
    return ControlSample(delta=l[..., 2], omega=l[..., 0])


def optimal_stark_fixed_pump(l):
    """Stationary detuning ``delta = l3`` when the pump is prescribed."""
    return np.asarray(l, dtype=float)[..., 2]


# ---------------------------------------------------------------------------
# Extremal systems
# ---------------------------------------------------------------------------

def _l13(Y):
    r, p = Y[:, 0:3], Y[:, 3:6]
    l1 = r[:, 1] * p[:, 2] - r[:, 2] * p[:, 1]
    l3 = r[:, 0] * p[:, 1] - r[:, 1] * p[:, 0]
    return l1, l3


def _scaled_system(a: float, b: float, members: Sequence[float], tag: str, cost):
    prm = np.concatenate([[a, b, len(members)], np.asarray(members, dtype=float)])

    def controls(t, Y):
        l1, l3 = _l13(Y)
        return a * l3, b * l1

    def hamiltonian(t, Y):
        d, o = controls(t, Y)
        l1, l3 = _l13(Y)
        return l1 * o + l3 * d + P0 * running_cost(cost, ControlSample(d, o), t)

    return ExtremalSystem(_systems.SCALED_FEEDBACK, prm, controls, hamiltonian, tag=tag,
                          n_aux=3 * len(members))


def extremal_rhs(cost: CostFunctional = CostFunctional(), members: Sequence[float] = ()) -> ExtremalSystem:
    """Compiled state-costate system for ``cost``.

    Parameters
    ----------
    cost : CostFunctional
    members : sequence of float
        For the ensemble tags, positions ``z`` whose Bloch vectors are carried
        along as auxiliary states, each driven by the perturbed field at that
        position. Ignored otherwise.
    """
    tag = cost.tag
    if tag == "energy":
        return _scaled_system(1.0, 1.0, (), tag, cost)
    if tag == "ensemble-linear":
        from .inhomogeneity import ensemble_cost_coeff_linear
        inh = cost.inhom
        scales = [1.0 + inh.K(z) for z in members]
        return _scaled_system(1.0 / ensemble_cost_coeff_linear(inh), 1.0 / inh.Z, scales, tag, cost)
    if tag == "fixed-pump-energy":
        pump = cost.pump_params
        prm = np.concatenate([pump.as_array(), [1.0]])

        def controls(t, Y):
            _, l3 = _l13(Y)
            return l3, gaussian_pump(t, pump)

        def hamiltonian(t, Y):
            d, o = controls(t, Y)
            l1, l3 = _l13(Y)
            return l1 * o + l3 * d + P0 * (d ** 2 + o ** 2)

        return ExtremalSystem(_systems.FIXED_PUMP, prm, controls, hamiltonian, tag=tag,
                              autonomous=False, max_step_hint=0.5 * pump.sigma_p)
    if tag == "ensemble-zt":
        from .inhomogeneity import zt_system
        return zt_system(cost, members)
    if tag == "mixed-adiabatic":
        return mixed_adiabatic_system()
    raise ValueError(f"unsupported cost tag {tag!r}")


def mixed_adiabatic_system() -> ExtremalSystem:
    """Augmented system for ``r = ddelta*omega - domega*delta + delta^2 + omega^2``.

    ``delta`` and ``omega`` become states with rates ``u1``, ``u2`` as controls.
    ``H`` is linear in ``u``, so stationarity gives the singular-arc relations
    ``q_delta = omega/2`` and ``q_omega = -delta/2`` for their adjoints;
    differentiating these against the adjoint equations yields

        ddelta/dt = l1 - omega,    domega/dt = delta - l3.

    State layout: ``[R(3), p(3), delta, omega, q_delta, q_omega]`` (10
    equations). Auxiliary initial values are ``[delta, omega, omega/2, -delta/2]``;
    use :func:`mixed_aux0`.
    """
    def controls(t, Y):
        return Y[:, 6].copy(), Y[:, 7].copy()

    def hamiltonian(t, Y):
        l1, l3 = _l13(Y)
        d, o = Y[:, 6], Y[:, 7]
        u1, u2 = l1 - o, d - l3
        q1, q2 = Y[:, 8], Y[:, 9]
        return l1 * o + l3 * d + q1 * u1 + q2 * u2 + P0 * (u1 * o - u2 * d + d * d + o * o)

    return ExtremalSystem(_systems.MIXED_ADIABATIC, np.zeros(1), controls, hamiltonian,
                          tag="mixed-adiabatic", n_aux=4)


def mixed_aux0(delta0: float, omega0: float) -> np.ndarray:
    return np.array([delta0, omega0, 0.5 * omega0, -0.5 * delta0])


# ---------------------------------------------------------------------------
# Shooting
# ---------------------------------------------------------------------------

@dataclass
class ShootingProblem:
    cost: CostFunctional = field(default_factory=CostFunctional)
    t_i: float = 0.0
    t_f: float = 100.0
    r_start: np.ndarray = field(default_factory=lambda: SOUTH_POLE.copy())
    r_target: np.ndarray = field(default_factory=lambda: NORTH_POLE.copy())
    #: mixed-adiabatic only: start the controls at rest (zero initial rates),
    #: i.e. delta(t_i) = l3(t_i), omega(t_i) = l1(t_i). If False, the initial
    #: controls are two extra shooting unknowns.
    controls_at_rest: bool = True

    def __post_init__(self):
        for name in ("r_start", "r_target"):
            v = np.asarray(getattr(self, name), dtype=float)
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must lie on the unit sphere")
            setattr(self, name, v)
        if not self.t_f > self.t_i:
            raise ValueError("t_f must exceed t_i")

    @property
    def n_unknowns(self) -> int:
        return 5 if self.cost.tag == "mixed-adiabatic" and not self.controls_at_rest else 3


@dataclass
class Extremal:
    """Converged extremal with its diagnostics."""

    trajectory: Trajectory
    cost_tag: str
    p_initial: np.ndarray
    aux_initial: np.ndarray
    residual: float
    iterations: int
    guess_index: int
    cost_value: float
    conservation: dict

    @property
    def times(self):
        return self.trajectory.times

    @property
    def delta(self):
        return self.trajectory.delta

    @property
    def omega(self):
        return self.trajectory.omega

    @property
    def l(self):
        return self.trajectory.extras["l"]

    @property
    def H(self):
        return self.trajectory.extras["H"]

    def control_field(self) -> SampledField:
        return SampledField(self.times, self.delta, self.omega)

    def summary(self) -> dict:
        return {
            "cost_tag": self.cost_tag,
            "p_initial": [float(x) for x in self.p_initial],
            "aux_initial": [float(x) for x in self.aux_initial],
            "residual": float(self.residual),
            "H": float(np.mean(self.H)),
            "l_sq": float(np.mean(self.trajectory.extras["l_sq"])),
            "iterations": int(self.iterations),
            "guess_index": int(self.guess_index),
            "cost": float(self.cost_value),
            "conservation": {k: float(v) for k, v in self.conservation.items()},
        }

    def export(self, out_dir, stem: str = "extremal") -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = self.trajectory.to_csv(out_dir / f"{stem}.csv")
        js = out_dir / f"{stem}.json"
        js.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return [csv_path, js]


def guess_ladder(n_random: int = 20, seed: int = 0) -> list[np.ndarray]:
    """Deterministic initial-costate guesses.

    Magnitudes {0.05, 0.1, 0.2, 0.5, 1, 2} times the six signed axes and the
    eight cube diagonals, followed by ``n_random`` seeded random directions
    with log-uniform magnitudes in [0.05, 2].
    """
    dirs = [s * e for e in np.eye(3) for s in (1.0, -1.0)]
    dirs += [np.array([a, b, c]) / np.sqrt(3.0)
             for a in (1.0, -1.0) for b in (1.0, -1.0) for c in (1.0, -1.0)]
    out = [m * d for m in (0.05, 0.1, 0.2, 0.5, 1.0, 2.0) for d in dirs]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.normal(size=3)
        out.append(v / np.linalg.norm(v) * np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
    return out


def _endpoint(system, sp, x, cfg):
    p0, aux0 = _split(sp, x)
    traj = integrate_extremal(system, sp.r_start, p0, sp.t_i, sp.t_f, cfg,
                              t_eval=np.array([sp.t_i, sp.t_f]), aux0=aux0)
    return traj.states[-1] - sp.r_target


def _split(sp, x):
    if sp.cost.tag != "mixed-adiabatic":
        return x[:3], None
    if sp.controls_at_rest:
        l = np.cross(sp.r_start, x[:3])
        return x[:3], mixed_aux0(l[2], l[0])
    return x[:3], mixed_aux0(x[3], x[4])


def _jacobian(system, sp, x, cfg):
    n = len(x)
    J = np.empty((3, n))
    for j in range(n):
        h = 1e-6 * max(abs(x[j]), 1e-3)
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (_endpoint(system, sp, x + e, cfg) - _endpoint(system, sp, x - e, cfg)) / (2 * h)
    return J


def newton_refine(sp: ShootingProblem, x0, cfg: IntegratorConfig, tol: float = 1e-4,
                  max_iter: int = 40, system: Optional[ExtremalSystem] = None):
    """Damped Gauss-Newton on the endpoint residual.

    Steps are minimum-norm least-squares solutions (the residual lives on the
    tangent plane of the sphere and the costate component along ``r_start``
    is inert). Each accepted step strictly decreases the residual norm.

    Returns ``(x, residual, iterations, history)``.
    """
    system = system or extremal_rhs(sp.cost)
    x = np.asarray(x0, dtype=float).copy()
    F = _endpoint(system, sp, x, cfg)
    res = float(np.linalg.norm(F))
    history = [res]
    target = min(tol * 1e-4, 1e-9)
    it = 0
    while it < max_iter and res > target:
        it += 1
        J = _jacobian(system, sp, x, cfg)
        dx = -np.linalg.lstsq(J, F, rcond=1e-10)[0]
        if not np.all(np.isfinite(dx)) or np.linalg.norm(dx) == 0:
            break
        # keep steps comparable to the costate scale
        scale = max(1.0, np.linalg.norm(x))
        if np.linalg.norm(dx) > 2 * scale:
            dx *= 2 * scale / np.linalg.norm(dx)
        alpha = 1.0
        accepted = False
        while alpha > 1e-4:
            xn = x + alpha * dx
            Fn = _endpoint(system, sp, xn, cfg)
            rn = float(np.linalg.norm(Fn))
            if rn < res:
                x, F, res = xn, Fn, rn
                accepted = True
                break
            alpha *= 0.5
        history.append(res)
        if not accepted:
            break
    return x, res, it, history


def _attempt(args):
    sp, x0, cfg, tol, max_iter, idx = args
    try:
        x, res, it, hist = newton_refine(sp, x0, cfg, tol, max_iter)
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return {"index": idx, "guess": list(map(float, x0)), "converged": False,
                "error": str(exc)}
    return {"index": idx, "guess": list(map(float, x0)), "x": x, "residual": res,
            "iterations": it, "converged": res < tol, "history": hist}


def build_extremal(sp: ShootingProblem, x, cfg: IntegratorConfig, *, residual=np.nan,
                   iterations=0, guess_index=-1, members: Sequence[float] = ()) -> Extremal:
    """Integrate the extremal from unknowns ``x`` on the dense output grid."""
    system = extremal_rhs(sp.cost, members)
    p0, aux0 = _split(sp, np.asarray(x, dtype=float))
    if members:
        aux0 = np.tile(sp.r_start, len(members))
    traj = integrate_extremal(system, sp.r_start, p0, sp.t_i, sp.t_f, cfg, aux0=aux0)
    if sp.cost.tag == "mixed-adiabatic":
        aux = traj.extras["aux"]
        s = ControlSample(aux[:, 0], aux[:, 1], np.gradient(aux[:, 0], traj.times),
                          np.gradient(aux[:, 1], traj.times))
    else:
        s = ControlSample(traj.delta, traj.omega)
    r = running_cost(sp.cost, s, traj.times)
    cost_value = float(trapezoid(r, traj.times))
    return Extremal(traj, sp.cost.tag, p0.copy(), np.zeros(0) if aux0 is None else np.asarray(aux0),
                    float(residual), iterations, guess_index, cost_value,
                    conservation_report(traj))


def solve_shooting(sp: ShootingProblem, guesses: Optional[Sequence] = None, tol: float = 1e-4,
                   cfg: Optional[IntegratorConfig] = None, *, max_iter: int = 40,
                   aux_guess=(0.0, 0.0), collect_all: bool = False, workers: int = 1,
                   seed: int = 0):
    """Solve the fixed-endpoint problem by shooting on the initial costate.

    Parameters
    ----------
    sp : ShootingProblem
    guesses : sequence of array_like, optional
        Initial costates tried in order; defaults to :func:`guess_ladder`.
        For ``mixed-adiabatic`` each guess may also carry the initial
        ``(delta, omega)`` as components 4 and 5, otherwise ``aux_guess`` is used.
    tol : float
        Acceptance threshold on ``|R(t_f) - r_target|``.
    collect_all : bool
        Try every guess and return all converged extremals ranked by cost
        (ties by guess index). Otherwise return the first converged one.
    workers : int
        Attempts run in batches of this size on a process pool; the result
        is selected by guess index, never by completion order.

    Raises
    ------
    ShootingFailure
        When no guess converges.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cfg = cfg or IntegratorConfig()
    guesses = list(guess_ladder(seed=seed) if guesses is None else guesses)
    if not guesses:
        raise ValueError("at least one guess is required")
    xs = []
    for g in guesses:
        g = np.asarray(g, dtype=float)
        if sp.n_unknowns == 5 and len(g) == 3:
            g = np.concatenate([g, aux_guess])
        xs.append(g)

    diagnostics = []
    found = []
    batch = max(1, int(workers))
    pool = ProcessPoolExecutor(batch) if batch > 1 else None
    try:
        for start in range(0, len(xs), batch):
            jobs = [(sp, xs[i], cfg, tol, max_iter, i) for i in range(start, min(start + batch, len(xs)))]
            results = list(pool.map(_attempt, jobs)) if pool else [_attempt(j) for j in jobs]
            for r in results:
                diagnostics.append({k: v for k, v in r.items() if k != "x"})
                if r["converged"]:
                    found.append(r)
            if found and not collect_all:
                break
    finally:
        if pool:
            pool.shutdown()

    if not found:
        raise ShootingFailure(f"no guess converged ({len(diagnostics)} tried)", diagnostics)
    extremals = [build_extremal(sp, r["x"], cfg, residual=r["residual"], iterations=r["iterations"],
                                guess_index=r["index"]) for r in found]
    if not collect_all:
        return extremals[0]
    return sorted(extremals, key=lambda e: (e.cost_value, e.guess_index))
