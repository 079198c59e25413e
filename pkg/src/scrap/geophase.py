"""Geometric phase of the adiabatic state along control paths.

For a real two-level Hamiltonian the adiabatic states can be taken real, so
the vector potential in the control plane ``alpha = (delta, omega)`` is purely
imaginary:

    A = (i/2) (-omega, delta) / (delta^2 + omega^2).

Dropping the factor ``i``, the phase along a path is half the increment of the
polar angle ``phi = atan2(delta, omega) = pi/2 - 2 theta``:

    gamma = -1/2 int (delta domega - omega ddelta) / (delta^2 + omega^2) dt
          = 1/2 (phi_end - phi_start),

so every closed loop around the conical intersection at the origin
contributes ``pi``. Winding numbers are counted positive in the direction of
increasing ``phi`` (from the omega axis towards the delta axis). All public
functions return real phases.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import _fmt
from .model import ConicalIntersectionError, ControlSample, ScrapError, adiabaticity

MAX_ANGLE_STEP = np.pi / 8


class RefinementError(ScrapError, ValueError):
    """The path cannot be resolved to the required angular step."""


class NotApplicableError(ScrapError, ValueError):
    """A precondition of the requested formula does not hold."""


class OpenPathWarning(UserWarning):
    """Phase of an open path is the polar-angle functional, not a physical phase."""


@dataclass
class ControlPath:
    """Samples of ``(delta(t), omega(t))``.

    Parameters
    ----------
    times, delta, omega : array_like
        Samples; ``times`` strictly increasing.
    source : callable, optional
        ``source(t) -> (delta, omega)`` used to refine the path. Without it,
        refinement inserts points on the straight segments between samples,
        which is exact for polygonal paths.
    closure_tol : float
        Paths whose end points differ by less than this (L1) are closed.
    """

    times: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    source: Optional[Callable] = None
    closure_tol: float = 1e-8

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if not (self.times.shape == self.delta.shape == self.omega.shape) or self.times.ndim != 1:
            raise ValueError("times, delta and omega must be 1-D arrays of equal length")
        if len(self.times) < 2:
            raise ValueError("a path needs at least two samples")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any((self.delta == 0.0) & (self.omega == 0.0)):
            raise ConicalIntersectionError("path sample at the conical intersection")

    @property
    def closed(self) -> bool:
        gap = abs(self.delta[-1] - self.delta[0]) + abs(self.omega[-1] - self.omega[0])
        return bool(gap < self.closure_tol)

    @classmethod
    def from_function(cls, fn: Callable, t_i: float, t_f: float, n: int = 257, **kw) -> "ControlPath":
        """Sample ``fn(t) -> (delta, omega)`` on a uniform grid and keep it for refinement."""
        t = np.linspace(t_i, t_f, n)
        d, o = fn(t)
        return cls(t, np.broadcast_to(d, t.shape).astype(float),
                   np.broadcast_to(o, t.shape).astype(float), source=fn, **kw)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "delta", "omega"])
            for row in zip(self.times, self.delta, self.omega):
                w.writerow([_fmt(x) for x in row])
        return path

    @classmethod
    def from_csv(cls, path, **kw) -> "ControlPath":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if [c.strip() for c in rows[0]] != ["t", "delta", "omega"]:
            raise ValueError("path CSV must have header t,delta,omega")
        arr = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("path CSV must have three columns")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], **kw)


def cpr_gaussian_path(p, t_i: float = 0.0, t_f: float = 100.0, n: int = 401,
                      signed: bool = True, **kw) -> ControlPath:
    """Population-return loop from a Gaussian Stark pulse and a Gaussian pump pair.

    The Stark pulse of ``p`` crosses resonance twice; one pump Gaussian (width
    ``p.sigma_p``, amplitude ``p.Omega0``) is centred on each crossing. With
    ``signed`` the second pump pulse has opposite sign, so the loop passes
    the origin on both sides and encircles it; otherwise both pulses are
    positive and the loop stays in the ``omega > 0`` half plane.
    """
    from .model import SQRT_2PI, gaussian_stark

    arg = p.Delta0 / (SQRT_2PI * p.S0 * p.sigma_s)
    if arg <= 1.0:
        raise ValueError("Stark pulse never reaches resonance")
    half = p.sigma_s * np.sqrt(2.0 * np.log(arg))
    t1, t2 = p.t_s - half, p.t_s + half
    amp = p.Omega0 / (SQRT_2PI * p.sigma_p)
    sign2 = -1.0 if signed else 1.0

    def fn(t):
        t = np.asarray(t, dtype=float)
        g1 = np.exp(-((t - t1) ** 2) / (2 * p.sigma_p ** 2))
        g2 = np.exp(-((t - t2) ** 2) / (2 * p.sigma_p ** 2))
        return gaussian_stark(t, p), amp * (g1 + sign2 * g2)

    return ControlPath.from_function(fn, t_i, t_f, n, **kw)


def vector_potential(s: ControlSample):
    """Real part of ``-i A``: ``(-omega, delta) / (2 (delta^2 + omega^2))``.

    Returns an array whose last axis has length 2.
    """
    d = np.asarray(s.delta, dtype=float)
    o = np.asarray(s.omega, dtype=float)
    if np.any((d == 0) & (o == 0)):
        raise ConicalIntersectionError("vector potential is singular at the origin")
    r2 = 2.0 * (d * d + o * o)
    return np.stack([-o / r2, d / r2], axis=-1)


def _wrap(x):
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _segment_increments(path: ControlPath, max_step: float, max_depth: int) -> np.ndarray:
    """Polar-angle increments per segment, bisecting until each is below ``max_step``."""
    out = []
    src = path.source
    stack_base = list(zip(path.times[:-1], path.times[1:], path.delta[:-1], path.omega[:-1],
                          path.delta[1:], path.omega[1:]))
    for seg in stack_base:
        stack = [(seg, 0)]
        while stack:
            (ta, tb, da, oa, db, ob), depth = stack.pop()
            step = _wrap(np.arctan2(db, ob) - np.arctan2(da, oa))
            if abs(step) < max_step:
                out.append(step)
                continue
            if depth >= max_depth:
                # a jump that survives bisection on a chord through the origin is a crossing
                ex, ey = db - da, ob - oa
                chord = np.hypot(ex, ey)
                dist = abs(da * ey - oa * ex) / chord if chord > 0 else np.hypot(da, oa)
                if dist <= 1e-6 * max(np.hypot(da, oa), np.hypot(db, ob)):
                    raise ConicalIntersectionError(
                        f"path passes through the origin near t = {0.5 * (ta + tb):.6g}")
                raise RefinementError(
                    f"path under-resolved near t in [{ta:.6g}, {tb:.6g}] after {max_depth} bisections")
            tm = 0.5 * (ta + tb)
            if src is not None:
                dm, om = (float(v) for v in src(tm))
            else:
                dm, om = 0.5 * (da + db), 0.5 * (oa + ob)
            if dm == 0.0 and om == 0.0:
                raise ConicalIntersectionError(f"path passes through the origin at t = {tm:.6g}")
            # right half first so the left half is processed first
            stack.append(((tm, tb, dm, om, db, ob), depth + 1))
            stack.append(((ta, tm, da, oa, dm, om), depth + 1))
    return np.asarray(out)


def total_angle(path: ControlPath, max_step: float = MAX_ANGLE_STEP, max_depth: int = 40) -> float:
    """Unwrapped increment of ``atan2(delta, omega)`` along the path."""
    return float(np.sum(_segment_increments(path, max_step, max_depth)))


def winding_number(path: ControlPath, **kw) -> int:
    """Signed number of times a closed path encircles the origin."""
    if not path.closed:
        raise ValueError("winding number needs a closed path")
    return int(np.rint(total_angle(path, **kw) / (2.0 * np.pi)))


def geometric_phase(path: ControlPath, **kw) -> float:
    """Real geometric phase ``|Delta phi| / 2`` reduced to ``[0, 2 pi)``.

    For closed paths this is ``pi * winding (mod 2 pi)``. Open paths are
    accepted with an :class:`OpenPathWarning`.
    """
    if not path.closed:
        warnings.warn("open path: reporting the polar-angle functional", OpenPathWarning,
                      stacklevel=2)
    gamma = 0.5 * abs(total_angle(path, **kw)) % (2.0 * np.pi)
    # values within rounding of 2 pi are 0
    return 0.0 if np.isclose(gamma, 2.0 * np.pi, rtol=0, atol=1e-12) else float(gamma)


def phase_report(path: ControlPath, **kw) -> dict:
    """``{winding, gamma, closed, warnings}``; winding is None for open paths."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gamma = geometric_phase(path, **kw)
    closed = path.closed
    return {"winding": winding_number(path, **kw) if closed else None, "gamma": gamma,
            "closed": closed, "warnings": [str(w.message) for w in caught]}


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def phase_via_adiabaticity(times, delta, omega, ddelta_dt, domega_dt, rtol: float = 1e-6) -> float:
    """Phase from the adiabaticity integral on constant-radius control paths.

    When ``delta^2 + omega^2 = rho^2`` is constant,
    ``(delta domega - omega ddelta) / rho^2 = 2 rho AD`` in magnitude, so

        gamma = rho * int AD dt,    rho = sqrt(l1^2 + l3^2).

    Raises
    ------
    NotApplicableError
        If the radius varies by more than ``rtol`` (relative).
    """
    d = np.asarray(delta, dtype=float)
    o = np.asarray(omega, dtype=float)
    rho = np.hypot(d, o)
    r0 = float(np.mean(rho))
    if r0 == 0 or np.max(np.abs(rho - r0)) > rtol * r0:
        raise NotApplicableError("control radius is not constant along the path")
    ad = adiabaticity(ControlSample(d, o, np.asarray(ddelta_dt), np.asarray(domega_dt)))
    return float(r0 * trapezoid(ad, np.asarray(times, dtype=float)))


def extremal_phase_via_adiabaticity(extremal, rtol: float = 1e-6) -> float:
    """:func:`phase_via_adiabaticity` on an energy-tag extremal.

    The control rates follow from ``dl/dt = l2 (-l3, 0, l1)``.
    """
    l = extremal.l
    l1, l2, l3 = l[:, 0], l[:, 1], l[:, 2]
    return phase_via_adiabaticity(extremal.times, l3, l1, l2 * l1, -l2 * l3, rtol)
