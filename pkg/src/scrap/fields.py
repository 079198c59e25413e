"""Control field representations.

A control field maps time to a :class:`~scrap.model.ControlSample` carrying
``delta``, ``omega`` and their time derivatives. Built-in fields also expose a
packed parameter vector so the integrators can run them in compiled code.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import _systems
from .model import (ControlSample, PulseParams, gaussian_pump, gaussian_pump_dt,
                    gaussian_stark, gaussian_stark_dt)


class ControlField:
    """Base class. Subclasses implement :meth:`sample`."""

    #: upper bound on the integrator step that still resolves the field
    max_step_hint: float = np.inf

    def sample(self, t) -> ControlSample:
        raise NotImplementedError

    def compiled(self) -> Optional[tuple[int, np.ndarray]]:
        """``(kind, prm)`` for the jitted integrator, or None."""
        return None


class GaussianField(ControlField):
    """Gaussian Stark and pump pulses."""

    def __init__(self, params: PulseParams):
        self.params = params
        widths = [params.sigma_p] + ([params.sigma_s] if params.sigma_s > 0 else [])
        self.max_step_hint = 0.5 * min(widths)

    def sample(self, t) -> ControlSample:
        p = self.params
        return ControlSample(gaussian_stark(t, p), gaussian_pump(t, p),
                             gaussian_stark_dt(t, p), gaussian_pump_dt(t, p))

    def compiled(self):
        return _systems.BLOCH_GAUSS, self.params.as_array()


class ConstantField(ControlField):
    def __init__(self, delta: float, omega: float):
        self.delta = float(delta)
        self.omega = float(omega)

    def sample(self, t) -> ControlSample:
        shape = np.shape(t)
        z = np.zeros(shape)
        return ControlSample(np.full(shape, self.delta), np.full(shape, self.omega), z, z)

    def compiled(self):
        return _systems.BLOCH_CONST, np.array([self.delta, self.omega])


class SampledField(ControlField):
    """Controls on a time grid, interpolated by piecewise cubic Hermite.

    Missing derivatives are taken from a not-a-knot cubic spline through the
    samples, which makes the interpolant that spline. Outside the grid the end
    values are held.
    """

    def __init__(self, times, delta, omega, ddelta_dt=None, domega_dt=None):
        self.times = np.asarray(times, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be a strictly increasing 1-D grid")
        self.delta = np.asarray(delta, dtype=float)
        self.omega = np.asarray(omega, dtype=float)
        self.ddelta_dt = (CubicSpline(self.times, self.delta)(self.times, 1)
                          if ddelta_dt is None else np.asarray(ddelta_dt, dtype=float))
        self.domega_dt = (CubicSpline(self.times, self.omega)(self.times, 1)
                          if domega_dt is None else np.asarray(domega_dt, dtype=float))
        self.max_step_hint = float(np.min(np.diff(self.times)))
        self._prm = np.concatenate([[len(self.times)], self.times, self.delta, self.omega,
                                    self.ddelta_dt, self.domega_dt])

    def sample(self, t) -> ControlSample:
        t = np.clip(np.asarray(t, dtype=float), self.times[0], self.times[-1])
        j = np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2)
        h = self.times[j + 1] - self.times[j]
        s = (t - self.times[j]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        # derivative basis
        g00 = 6 * s * (s - 1) / h
        g10 = (1 - s) * (1 - 3 * s)
        g01 = -g00
        g11 = s * (3 * s - 2)

        def interp(v, dv):
            val = h00 * v[j] + h10 * h * dv[j] + h01 * v[j + 1] + h11 * h * dv[j + 1]
            der = g00 * v[j] + g10 * dv[j] + g01 * v[j + 1] + g11 * dv[j + 1]
            return val, der

        d, dd = interp(self.delta, self.ddelta_dt)
        o, do = interp(self.omega, self.domega_dt)
        return ControlSample(d, o, dd, do)

    def compiled(self):
        return _systems.BLOCH_SAMPLED, self._prm


class FunctionField(ControlField):
    """Controls given by Python callables of time.

    Runs through the pure-Python integrator path. Derivative callables are
    optional and only needed for the adiabaticity function.
    """

    def __init__(self, delta: Callable, omega: Callable,
                 ddelta_dt: Optional[Callable] = None, domega_dt: Optional[Callable] = None,
                 max_step_hint: float = np.inf):
        self._delta = delta
        self._omega = omega
        self._ddelta = ddelta_dt
        self._domega = domega_dt
        self.max_step_hint = max_step_hint

    def sample(self, t) -> ControlSample:
        t = np.asarray(t, dtype=float)
        dd = None if self._ddelta is None else np.broadcast_to(self._ddelta(t), t.shape) * 1.0
        do = None if self._domega is None else np.broadcast_to(self._domega(t), t.shape) * 1.0
        return ControlSample(np.broadcast_to(self._delta(t), t.shape) * 1.0,
                             np.broadcast_to(self._omega(t), t.shape) * 1.0, dd, do)
