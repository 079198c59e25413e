"""Pointwise formulas of the two-level SCRAP model.

Conventions
-----------
* Atomic units throughout; ``delta`` is the dynamic detuning and ``omega`` the
  (real) Rabi frequency.
* The Bloch vector obeys ``dR/dt = w x R`` with ``w = (omega, 0, delta)``.
  South pole ``(0, 0, -1)`` is state |1>, north pole ``(0, 0, 1)`` is |2>.
* The mixing angle is ``theta = atan2(omega, delta) / 2``, so that
  ``theta -> pi/2`` for negative detuning and ``theta -> 0`` for positive.

All functions accept scalars or numpy arrays (elementwise).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)

SOUTH_POLE = np.array([0.0, 0.0, -1.0])
NORTH_POLE = np.array([0.0, 0.0, 1.0])


class ScrapError(Exception):
    """Base class for model errors."""


class ConicalIntersectionError(ScrapError, ValueError):
    """Raised when a quantity is evaluated at delta = omega = 0."""


class DegenerateWidthError(ScrapError, ValueError):
    """Raised when a Gaussian of zero width is evaluated."""


@dataclass(frozen=True)
class PulseParams:
    """Gaussian Stark and pump pulse parameters.

    Defaults reproduce the reference parameter set (S0=1, Delta0=Omega0=100,
    sigma_p=5, t_p=50) with the Stark pulse at reduced point (0.3, 2).
    """

    S0: float = 1.0
    Delta0: float = 100.0
    Omega0: float = 100.0
    sigma_s: float = 10.0
    sigma_p: float = 5.0
    t_s: float = 65.0
    t_p: float = 50.0

    def __post_init__(self):
        if not self.S0 > 0:
            raise ValueError(f"S0 must be positive, got {self.S0}")
        if not self.sigma_p > 0:
            raise ValueError(f"sigma_p must be positive, got {self.sigma_p}")
        if self.sigma_s < 0:
            raise ValueError(f"sigma_s must be non-negative, got {self.sigma_s}")
        if self.Omega0 < 0 or self.Delta0 < 0:
            raise ValueError("pulse areas Omega0 and Delta0 must be non-negative")

    @property
    def reduced(self) -> "ReducedCoords":
        return ReducedCoords.from_params(self)

    def with_reduced(self, tau: float, sigma: float) -> "PulseParams":
        """Copy with the Stark pulse placed at reduced coordinates (tau, sigma)."""
        return replace(self, t_s=self.t_p * (1.0 + tau), sigma_s=sigma * self.sigma_p)

    def probe_time(self) -> float:
        """Default probe time ``t_p + 3 sigma_p``."""
        return self.t_p + 3.0 * self.sigma_p

    def as_array(self) -> np.ndarray:
        """Pack as ``[S0, Delta0, Omega0, sigma_s, sigma_p, t_s, t_p]``."""
        return np.array([self.S0, self.Delta0, self.Omega0, self.sigma_s,
                         self.sigma_p, self.t_s, self.t_p], dtype=float)


@dataclass(frozen=True)
class ReducedCoords:
    """Stark pulse centre and width relative to the pump pulse."""

    tau: float
    sigma: float

    @classmethod
    def from_params(cls, p: PulseParams) -> "ReducedCoords":
        return cls(tau=(p.t_s - p.t_p) / p.t_p, sigma=p.sigma_s / p.sigma_p)


@dataclass(frozen=True)
class ControlSample:
    """Instantaneous control values, optionally with time derivatives."""

    delta: "float | np.ndarray"
    omega: "float | np.ndarray"
    ddelta_dt: Optional["float | np.ndarray"] = None
    domega_dt: Optional["float | np.ndarray"] = None


@dataclass(frozen=True)
class AdiabaticFrame:
    theta: "float | np.ndarray"
    eps_minus: "float | np.ndarray"
    eps_plus: "float | np.ndarray"


# ---------------------------------------------------------------------------
# Gaussian pulses
# ---------------------------------------------------------------------------

def _require_width(sigma: float) -> None:
    if sigma <= 0:
        raise DegenerateWidthError(f"Gaussian width must be positive, got {sigma}")


def gaussian_stark(t, p: PulseParams):
    """Dynamic detuning ``-S0 + Delta0/(sqrt(2 pi) sigma_s) exp(-(t-t_s)^2/(2 sigma_s^2))``."""
    _require_width(p.sigma_s)
    t = np.asarray(t, dtype=float)
    g = np.exp(-((t - p.t_s) ** 2) / (2.0 * p.sigma_s ** 2))
    return -p.S0 + p.Delta0 / (SQRT_2PI * p.sigma_s) * g


def gaussian_stark_dt(t, p: PulseParams):
    """Analytic time derivative of :func:`gaussian_stark`."""
    _require_width(p.sigma_s)
    t = np.asarray(t, dtype=float)
    g = np.exp(-((t - p.t_s) ** 2) / (2.0 * p.sigma_s ** 2))
    return -p.Delta0 / (SQRT_2PI * p.sigma_s) * g * (t - p.t_s) / p.sigma_s ** 2


def gaussian_pump(t, p: PulseParams):
    """Rabi frequency ``Omega0/(sqrt(2 pi) sigma_p) exp(-(t-t_p)^2/(2 sigma_p^2))``."""
    _require_width(p.sigma_p)
    t = np.asarray(t, dtype=float)
    return p.Omega0 / (SQRT_2PI * p.sigma_p) * np.exp(-((t - p.t_p) ** 2) / (2.0 * p.sigma_p ** 2))


def gaussian_pump_dt(t, p: PulseParams):
    """Analytic time derivative of :func:`gaussian_pump`."""
    t = np.asarray(t, dtype=float)
    return -gaussian_pump(t, p) * (t - p.t_p) / p.sigma_p ** 2


def gaussian_sample(t, p: PulseParams) -> ControlSample:
    """Controls and their analytic derivatives at time(s) ``t``."""
    return ControlSample(
        delta=gaussian_stark(t, p),
        omega=gaussian_pump(t, p),
        ddelta_dt=gaussian_stark_dt(t, p),
        domega_dt=gaussian_pump_dt(t, p),
    )


# ---------------------------------------------------------------------------
# Adiabatic frame
# ---------------------------------------------------------------------------

def _check_origin(delta, omega) -> None:
    if np.any((np.asarray(delta) == 0.0) & (np.asarray(omega) == 0.0)):
        raise ConicalIntersectionError("delta = omega = 0 (conical intersection)")


def mixing_angle(s: ControlSample):
    """Mixing angle ``theta = atan2(omega, delta) / 2`` in ``[0, pi/2]`` for omega >= 0.

    Raises
    ------
    ConicalIntersectionError
        If both controls vanish.
    """
    _check_origin(s.delta, s.omega)
    return 0.5 * np.arctan2(s.omega, s.delta)


def adiabatic_energies(s: ControlSample):
    """Adiabatic energies ``(eps_minus, eps_plus)``.

    At delta = omega = 0 both energies are zero; use :func:`is_degenerate` to
    flag that point.
    """
    delta = np.asarray(s.delta, dtype=float)
    half_gap = 0.5 * np.hypot(delta, s.omega)
    return 0.5 * delta - half_gap, 0.5 * delta + half_gap


def is_degenerate(s: ControlSample):
    return (np.asarray(s.delta) == 0.0) & (np.asarray(s.omega) == 0.0)


def adiabatic_frame(s: ControlSample) -> AdiabaticFrame:
    em, ep = adiabatic_energies(s)
    return AdiabaticFrame(theta=mixing_angle(s), eps_minus=em, eps_plus=ep)


def adiabaticity(s: ControlSample):
    """Adiabaticity function ``|omega ddelta - domega delta| / (2 (omega^2 + delta^2)^(3/2))``.

    Values much smaller than one indicate adiabatic following. Requires the
    derivative fields of ``s``.
    """
    if s.ddelta_dt is None or s.domega_dt is None:
        raise ValueError("adiabaticity needs ddelta_dt and domega_dt")
    _check_origin(s.delta, s.omega)
    delta = np.asarray(s.delta, dtype=float)
    omega = np.asarray(s.omega, dtype=float)
    num = np.abs(omega * s.ddelta_dt - s.domega_dt * delta)
    # rho^3 can underflow for subnormal controls; the result is then inf or nan
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / (2.0 * (omega ** 2 + delta ** 2) ** 1.5)


def adiabatic_bloch(theta):
    """Bloch vector of the adiabatic state, ``(sin 2theta, 0, cos 2theta)``.

    This is the unit rotation axis ``w / |w|``, so it starts at the south
    pole when ``delta < 0`` and gives ``(1 + R3) / 2 = cos^2 theta``. The
    third component is often printed with a minus sign, which would put the
    adiabatic state at the opposite pole from the initial state.

    Returns an array whose last axis has length 3.
    """
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.sin(2 * theta), np.zeros_like(theta), np.cos(2 * theta)], axis=-1)


def nabc(r, r_ad):
    """Non-adiabatic Bloch correction ``R - R_AD``."""
    return np.asarray(r, dtype=float) - np.asarray(r_ad, dtype=float)


# ---------------------------------------------------------------------------
# Bloch dynamics
# ---------------------------------------------------------------------------

def bloch_axis(s: ControlSample):
    """Rotation axis ``w = (omega, 0, delta)`` with ``dR/dt = w x R``."""
    delta = np.asarray(s.delta, dtype=float)
    omega = np.asarray(s.omega, dtype=float)
    return np.stack([omega, np.zeros_like(delta), delta], axis=-1)


def bloch_generator(s: ControlSample) -> np.ndarray:
    """Antisymmetric 3x3 matrix ``M`` with ``M @ R == bloch_axis(s) x R``."""
    d, o = float(s.delta), float(s.omega)
    return np.array([[0.0, -d, 0.0],
                     [d, 0.0, -o],
                     [0.0, o, 0.0]])


def populations(r):
    """Diabatic populations ``(P1, P2) = ((1 - r3)/2, (1 + r3)/2)``."""
    r3 = np.asarray(r, dtype=float)[..., 2]
    return 0.5 * (1.0 - r3), 0.5 * (1.0 + r3)
