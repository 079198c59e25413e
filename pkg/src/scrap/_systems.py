"""Jitted right-hand sides ``rhs(t, y, prm)`` for the built-in systems.

Parameter vectors are flat float arrays; the packing for each system is
documented next to it and produced by the Python-level builders in
:mod:`scrap.dynamics`, :mod:`scrap.pmp` and :mod:`scrap.inhomogeneity`.
"""

import numpy as np
from numba import njit

SQRT_2PI = np.sqrt(2.0 * np.pi)


@njit(cache=True)
def _cross_into(out, o, wx, wy, wz, vx, vy, vz):
    out[o] = wy * vz - wz * vy
    out[o + 1] = wz * vx - wx * vz
    out[o + 2] = wx * vy - wy * vx


@njit(cache=True)
def stark(t, prm):
    # prm = [S0, Delta0, Omega0, sigma_s, sigma_p, t_s, t_p]
    s = prm[3]
    return -prm[0] + prm[1] / (SQRT_2PI * s) * np.exp(-((t - prm[5]) ** 2) / (2.0 * s * s))


@njit(cache=True)
def pump(t, prm):
    s = prm[4]
    return prm[2] / (SQRT_2PI * s) * np.exp(-((t - prm[6]) ** 2) / (2.0 * s * s))


@njit(cache=True)
def bloch_gauss_rhs(t, y, prm):
    """Bloch equations under Gaussian pulses plus the running integral of P2.

    y = [R1, R2, R3, int P2 dt]; prm = pulse array (7).
    """
    d = stark(t, prm)
    o = pump(t, prm)
    dy = np.empty(4)
    _cross_into(dy, 0, o, 0.0, d, y[0], y[1], y[2])
    dy[3] = 0.5 * (1.0 + y[2])
    return dy


@njit(cache=True)
def bloch_const_rhs(t, y, prm):
    """Bloch equations with constant controls; prm = [delta, omega]."""
    dy = np.empty(4)
    _cross_into(dy, 0, prm[1], 0.0, prm[0], y[0], y[1], y[2])
    dy[3] = 0.5 * (1.0 + y[2])
    return dy


@njit(cache=True)
def hermite_eval(t, prm):
    """Piecewise cubic Hermite controls from a packed sample table.

    prm = [n, t_1..t_n, delta_1..n, omega_1..n, ddelta_1..n, domega_1..n];
    clamps to the end values outside the table.
    """
    n = int(prm[0])
    ts = prm[1:1 + n]
    if t <= ts[0]:
        return prm[1 + n], prm[1 + 2 * n]
    if t >= ts[n - 1]:
        return prm[n + n], prm[3 * n]
    j = np.searchsorted(ts, t) - 1
    if j < 0:
        j = 0
    h = ts[j + 1] - ts[j]
    s = (t - ts[j]) / h
    h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
    h10 = s * (1.0 - s) ** 2
    h01 = s * s * (3.0 - 2.0 * s)
    h11 = s * s * (s - 1.0)
    d = (h00 * prm[1 + n + j] + h10 * h * prm[1 + 3 * n + j]
         + h01 * prm[2 + n + j] + h11 * h * prm[2 + 3 * n + j])
    o = (h00 * prm[1 + 2 * n + j] + h10 * h * prm[1 + 4 * n + j]
         + h01 * prm[2 + 2 * n + j] + h11 * h * prm[2 + 4 * n + j])
    return d, o


@njit(cache=True)
def bloch_sampled_rhs(t, y, prm):
    """Bloch equations under Hermite-interpolated sampled controls."""
    d, o = hermite_eval(t, prm)
    dy = np.empty(4)
    _cross_into(dy, 0, o, 0.0, d, y[0], y[1], y[2])
    dy[3] = 0.5 * (1.0 + y[2])
    return dy


@njit(cache=True)
def scaled_feedback_rhs(t, y, prm):
    """State-costate system with feedback ``delta = a l3``, ``omega = b l1``.

    prm = [a, b, n_z, s_1 .. s_n]; y = [R, p, R_z1, .., R_zn].
    Member ``i`` is driven by ``(s_i a l3, b l1)``, the reference by ``(a l3, b l1)``.
    """
    r1, r2, r3, p1, p2, p3 = y[0], y[1], y[2], y[3], y[4], y[5]
    l1 = r2 * p3 - r3 * p2
    l3 = r1 * p2 - r2 * p1
    d = prm[0] * l3
    o = prm[1] * l1
    dy = np.empty(y.shape[0])
    _cross_into(dy, 0, o, 0.0, d, r1, r2, r3)
    _cross_into(dy, 3, o, 0.0, d, p1, p2, p3)
    nz = int(prm[2])
    for i in range(nz):
        j = 6 + 3 * i
        _cross_into(dy, j, o, 0.0, prm[3 + i] * d, y[j], y[j + 1], y[j + 2])
    return dy


@njit(cache=True)
def fixed_pump_rhs(t, y, prm):
    """Gaussian pump, detuning feedback ``delta = a l3``.

    prm = [pulse(7), a]; y = [R, p].
    """
    r1, r2, r3, p1, p2, p3 = y[0], y[1], y[2], y[3], y[4], y[5]
    l3 = r1 * p2 - r2 * p1
    d = prm[7] * l3
    o = pump(t, prm)
    dy = np.empty(6)
    _cross_into(dy, 0, o, 0.0, d, r1, r2, r3)
    _cross_into(dy, 3, o, 0.0, d, p1, p2, p3)
    return dy


@njit(cache=True)
def _sinc(x):
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return np.sin(x) / x


@njit(cache=True)
def zt_drive(t, A, w, span, k, Z, zmid):
    """Return (f(t), I1(t), I2(t)) for the space-time perturbation."""
    f = A * np.cos(w * t / span)
    m = zmid / Z
    i1 = Z + f * Z * np.cos(k * m) * _sinc(0.5 * k)
    cos2 = 0.5 * Z * (1.0 + np.cos(2.0 * k * m) * _sinc(k))
    i2 = Z + 2.0 * f * Z * np.cos(k * m) * _sinc(0.5 * k) + f * f * cos2
    return f, i1, i2


@njit(cache=True)
def zt_feedback_rhs(t, y, prm):
    """Space-time perturbed feedback ``delta(t; z) = (1 + f eps(z)) l3 / I2``.

    prm = [A, w, span, k, Z, zmid, eps_ref, n_z, eps_1 .. eps_n];
    y = [R, p, R_z1, .., R_zn]; omega = l1 / Z for every member.
    """
    r1, r2, r3, p1, p2, p3 = y[0], y[1], y[2], y[3], y[4], y[5]
    l1 = r2 * p3 - r3 * p2
    l3 = r1 * p2 - r2 * p1
    f, i1, i2 = zt_drive(t, prm[0], prm[1], prm[2], prm[3], prm[4], prm[5])
    base = l3 / i2
    d = (1.0 + f * prm[6]) * base
    o = l1 / prm[4]
    dy = np.empty(y.shape[0])
    _cross_into(dy, 0, o, 0.0, d, r1, r2, r3)
    _cross_into(dy, 3, o, 0.0, d, p1, p2, p3)
    nz = int(prm[7])
    for i in range(nz):
        j = 6 + 3 * i
        dz = (1.0 + f * prm[8 + i]) * base
        _cross_into(dy, j, o, 0.0, dz, y[j], y[j + 1], y[j + 2])
    return dy


@njit(cache=True)
def mixed_adiabatic_rhs(t, y, prm):
    """Controls-as-states system for the mixed energy/adiabatic cost.

    y = [R(3), p(3), delta, omega, q_delta, q_omega]. The control rates
    follow from the singular-arc relations q_delta = omega/2, q_omega = -delta/2:
    ddelta/dt = l1 - omega, domega/dt = delta - l3.
    """
    r1, r2, r3, p1, p2, p3 = y[0], y[1], y[2], y[3], y[4], y[5]
    d, o = y[6], y[7]
    l1 = r2 * p3 - r3 * p2
    l3 = r1 * p2 - r2 * p1
    dy = np.empty(10)
    _cross_into(dy, 0, o, 0.0, d, r1, r2, r3)
    _cross_into(dy, 3, o, 0.0, d, p1, p2, p3)
    u1 = l1 - o
    u2 = d - l3
    dy[6] = u1
    dy[7] = u2
    dy[8] = 0.5 * u2
    dy[9] = -0.5 * u1
    return dy


BLOCH_GAUSS = 0
BLOCH_CONST = 1
BLOCH_SAMPLED = 2
SCALED_FEEDBACK = 3
FIXED_PUMP = 4
ZT_FEEDBACK = 5
MIXED_ADIABATIC = 6


@njit(cache=True)
def dispatch(kind, t, y, prm):
    if kind == BLOCH_GAUSS:
        return bloch_gauss_rhs(t, y, prm)
    if kind == BLOCH_CONST:
        return bloch_const_rhs(t, y, prm)
    if kind == BLOCH_SAMPLED:
        return bloch_sampled_rhs(t, y, prm)
    if kind == SCALED_FEEDBACK:
        return scaled_feedback_rhs(t, y, prm)
    if kind == FIXED_PUMP:
        return fixed_pump_rhs(t, y, prm)
    if kind == ZT_FEEDBACK:
        return zt_feedback_rhs(t, y, prm)
    return mixed_adiabatic_rhs(t, y, prm)
