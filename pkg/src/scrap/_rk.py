"""Jitted Runge-Kutta kernels for the built-in systems.

The right-hand side is selected by an integer ``kind`` (see
:mod:`scrap._systems`) rather than passed as a function: numba cannot cache
functions that receive other jitted functions as arguments.
"""

import numpy as np
from numba import njit

from ._systems import dispatch

OK = 0
STEP_UNDERFLOW = 1
TOO_MANY_STEPS = 2

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# continuous extension (Hairer, Norsett & Wanner, dopri5 dense output)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


@njit(cache=True)
def dp45(kind, prm, y0, t0, t1, rtol, atol, hmax, h0, t_out, max_steps):
    """Adaptive Dormand-Prince 5(4) with 4th-order dense output at ``t_out``.

    ``t_out`` must be ordered in the direction of integration and lie in
    ``[t0, t1]``. Returns ``(status, y_out, y_end, n_accepted, n_rejected)``.
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    y_out = np.empty((n_out, n))
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    y = y0.copy()
    t = t0
    k_out = 0
    # outputs sitting exactly at the start
    while k_out < n_out and (t_out[k_out] - t0) * direction <= 0.0:
        y_out[k_out, :] = y0
        k_out += 1
    if span == 0.0:
        return OK, y_out, y, 0, 0

    h = h0 if h0 > 0.0 else min(hmax, 1e-3 * span)
    h = min(h, hmax, span)
    k1 = dispatch(kind, t, y, prm)
    n_acc = 0
    n_rej = 0
    fac_old = 1e-4
    while (t1 - t) * direction > 0.0:
        if n_acc + n_rej >= max_steps:
            return TOO_MANY_STEPS, y_out, y, n_acc, n_rej
        if h < 1e-13 * max(1.0, abs(t)):
            return STEP_UNDERFLOW, y_out, y, n_acc, n_rej
        last = False
        if h >= abs(t1 - t):
            h = abs(t1 - t)
            last = True
        hs = h * direction
        k2 = dispatch(kind, t + C2 * hs, y + hs * (A21 * k1), prm)
        k3 = dispatch(kind, t + C3 * hs, y + hs * (A31 * k1 + A32 * k2), prm)
        k4 = dispatch(kind, t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3), prm)
        k5 = dispatch(kind, t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), prm)
        k6 = dispatch(kind, t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), prm)
        y_new = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        t_new = t1 if last else t + hs
        k7 = dispatch(kind, t_new, y_new, prm)
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err = 0.0
        for i in range(n):
            sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
            err += (err_vec[i] / sc) ** 2
        err = np.sqrt(err / n)
        if err <= 1.0:
            # dense output on the accepted step
            if k_out < n_out and (t_out[k_out] - t_new) * direction <= 0.0:
                ydiff = y_new - y
                bspl = hs * k1 - ydiff
                r4 = ydiff - hs * k7 - bspl
                r5 = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
                while k_out < n_out and (t_out[k_out] - t_new) * direction <= 0.0:
                    th = (t_out[k_out] - t) / hs
                    th1 = 1.0 - th
                    y_out[k_out, :] = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)))
                    k_out += 1
            y = y_new
            t = t_new
            k1 = k7
            n_acc += 1
            # Lund-stabilised step control
            fac11 = max(err, 1e-10) ** 0.17
            fac = fac11 / fac_old ** 0.04 / 0.9
            fac = min(5.0, max(0.1, fac))
            h = min(hmax, h / fac)
            fac_old = max(err, 1e-4)
        else:
            fac = min(5.0, max(1.0, max(err, 1e-10) ** 0.2 / 0.9))
            h = h / fac
            n_rej += 1
    return OK, y_out, y, n_acc, n_rej


@njit(cache=True)
def rk4(kind, prm, y0, t_out, h):
    """Classical fixed-step RK4 between consecutive output times.

    Each interval ``[t_out[j], t_out[j+1]]`` is split into the smallest number
    of equal substeps not exceeding ``h``.
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    y_out = np.empty((n_out, n))
    y = y0.copy()
    y_out[0, :] = y
    for j in range(n_out - 1):
        span = t_out[j + 1] - t_out[j]
        m = int(np.ceil(abs(span) / h - 1e-12))
        if m < 1:
            m = 1
        hs = span / m
        t = t_out[j]
        for _ in range(m):
            k1 = dispatch(kind, t, y, prm)
            k2 = dispatch(kind, t + 0.5 * hs, y + 0.5 * hs * k1, prm)
            k3 = dispatch(kind, t + 0.5 * hs, y + 0.5 * hs * k2, prm)
            k4 = dispatch(kind, t + hs, y + hs * k3, prm)
            y = y + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t + hs
        y_out[j + 1, :] = y
    return y_out
