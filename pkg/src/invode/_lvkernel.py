"""Compiled fast path for Lotka-Volterra family integrations.

Everything here works on the augmented 12-dimensional system: the two states
plus the 2x5 sensitivity matrix with respect to (a1, b1, b2, a2, rho), where
rho is the family perturbation (rotation p or saturation eps; its column is
zero for the plain family).  The integrator is an adaptive Dormand-Prince
5(4) pair; output times are hit exactly by step clamping.

Family ids: 0 = plain, 1 = rotated, 2 = saturated.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


# integration outcome codes
OK = 0
BLOWUP = 1
STEP_UNDERFLOW = 2

# Newton outcome codes
CONVERGED = 0
NO_CONVERGENCE = 1
INTEGRATION_FAILED = 2
SINGULAR_JACOBIAN = 3

STATE_LIMIT = 1e12
MIN_STEP = 1e-14
# step budgets: generous for plain trajectory work, tighter inside Newton
MAX_STEPS_DEFAULT = 400_000
MAX_STEPS_SHOOT = 60_000

# Dormand-Prince 5(4) tableau
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@njit(cache=True)
def _aug_rhs(family, famp, th, u, du):
    x = u[0]
    y = u[1]
    a1, b1, b2, a2 = th[0], th[1], th[2], th[3]
    if family == 2:
        eps = famp
        w = 1.0 / (eps * x + 1.0)
        q = x * y * w
        fx = a1 * x + b1 * q
        fy = b2 * q + a2 * y
        qx = y * w * w
        qy = x * w
        j11 = a1 + b1 * qx
        j12 = b1 * qy
        j21 = b2 * qx
        j22 = a2 + b2 * qy
        g11, g12, g13, g14 = x, q, 0.0, 0.0
        g21, g22, g23, g24 = 0.0, 0.0, q, y
        dq = -x * x * y * w * w
        g15 = b1 * dq
        g25 = b2 * dq
    else:
        q = x * y
        ux = a1 * x + b1 * q
        vy = b2 * q + a2 * y
        if family == 1:
            p = famp
            fx = ux - p * vy
            fy = vy + p * ux
            j11 = (a1 + b1 * y) - p * (b2 * y)
            j12 = (b1 * x) - p * (b2 * x + a2)
            j21 = (b2 * y) + p * (a1 + b1 * y)
            j22 = (b2 * x + a2) + p * (b1 * x)
            g11, g12, g13, g14 = x, q, -p * q, -p * y
            g21, g22, g23, g24 = p * x, p * q, q, y
            g15 = -vy
            g25 = ux
        else:
            fx = ux
            fy = vy
            j11 = a1 + b1 * y
            j12 = b1 * x
            j21 = b2 * y
            j22 = b2 * x + a2
            g11, g12, g13, g14 = x, q, 0.0, 0.0
            g21, g22, g23, g24 = 0.0, 0.0, q, y
            g15 = 0.0
            g25 = 0.0
    du[0] = fx
    du[1] = fy
    for k in range(5):
        s1 = u[2 + k]
        s2 = u[7 + k]
        if k == 0:
            gk1, gk2 = g11, g21
        elif k == 1:
            gk1, gk2 = g12, g22
        elif k == 2:
            gk1, gk2 = g13, g23
        elif k == 3:
            gk1, gk2 = g14, g24
        else:
            gk1, gk2 = g15, g25
        du[2 + k] = j11 * s1 + j12 * s2 + gk1
        du[7 + k] = j21 * s1 + j22 * s2 + gk2


@njit(cache=True)
def _integrate_from(family, famp, th, u, t0, t_eval, out, sens, with_sens, rtol, atol, max_steps):
    """Advance ``u`` in place from t0 through all of t_eval. Internal."""
    n = 12 if with_sens else 2
    m = len(t_eval)
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    k5 = np.empty(12)
    k6 = np.empty(12)
    k7 = np.empty(12)
    ut = np.empty(12)
    t = t0
    iout = 0
    while iout < m and t_eval[iout] <= t:
        out[iout, 0] = u[0]
        out[iout, 1] = u[1]
        if with_sens:
            for r in range(2):
                for c in range(5):
                    sens[iout, r, c] = u[2 + 5 * r + c]
        iout += 1
    if iout >= m:
        return OK
    t_end = t_eval[m - 1]
    _aug_rhs(family, famp, th, u, k1)
    h = 0.01
    nsteps = 0
    while t < t_end:
        nsteps += 1
        if nsteps > max_steps or h < MIN_STEP:
            return STEP_UNDERFLOW
        clamped = t + h >= t_eval[iout]
        h_use = t_eval[iout] - t if clamped else h
        for i in range(n):
            ut[i] = u[i] + h_use * _A21 * k1[i]
        _aug_rhs(family, famp, th, ut, k2)
        for i in range(n):
            ut[i] = u[i] + h_use * (_A31 * k1[i] + _A32 * k2[i])
        _aug_rhs(family, famp, th, ut, k3)
        for i in range(n):
            ut[i] = u[i] + h_use * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _aug_rhs(family, famp, th, ut, k4)
        for i in range(n):
            ut[i] = u[i] + h_use * (
                _A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]
            )
        _aug_rhs(family, famp, th, ut, k5)
        for i in range(n):
            ut[i] = u[i] + h_use * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _aug_rhs(family, famp, th, ut, k6)
        for i in range(n):
            ut[i] = u[i] + h_use * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        _aug_rhs(family, famp, th, ut, k7)
        err = 0.0
        for i in range(n):
            e = h_use * (
                _E1 * k1[i]
                + _E3 * k3[i]
                + _E4 * k4[i]
                + _E5 * k5[i]
                + _E6 * k6[i]
                + _E7 * k7[i]
            )
            sc = atol + rtol * max(abs(u[i]), abs(ut[i]))
            r = e / sc
            err += r * r
        err = np.sqrt(err / n)
        if err <= 1.0:
            t = t_eval[iout] if clamped else t + h_use
            for i in range(n):
                u[i] = ut[i]
                k1[i] = k7[i]
            nrm = abs(u[0]) + abs(u[1])
            if nrm > STATE_LIMIT or not np.isfinite(nrm):
                return BLOWUP
            while iout < m and t >= t_eval[iout]:
                out[iout, 0] = u[0]
                out[iout, 1] = u[1]
                if with_sens:
                    for r in range(2):
                        for c in range(5):
                            sens[iout, r, c] = u[2 + 5 * r + c]
                iout += 1
            if iout >= m:
                return OK
        if err == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * err ** (-0.2)
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        if clamped and err <= 1.0:
            pass  # keep the un-clamped proposal
        else:
            h = h_use * fac
    return OK


@njit(cache=True)
def integrate_lv(family, famp, th, x0, y0, t_eval, rtol, atol, with_sens, max_steps):
    """States (and 2x5 sensitivities) at the requested times from t=0."""
    m = len(t_eval)
    out = np.zeros((m, 2))
    sens = np.zeros((m, 2, 5))
    if m == 0:
        return out, sens, OK
    u = np.zeros(12)
    u[0] = x0
    u[1] = y0
    status = _integrate_from(family, famp, th, u, 0.0, t_eval, out, sens, with_sens, rtol, atol, max_steps)
    return out, sens, status


@njit(cache=True)
def _endpoint(family, famp, th, x, y, dt, rtol, atol, max_steps):
    """State after integrating for dt from (x, y). No sensitivities."""
    t_eval = np.empty(1)
    t_eval[0] = dt
    out = np.zeros((1, 2))
    sens = np.zeros((1, 2, 5))
    u = np.zeros(12)
    u[0] = x
    u[1] = y
    status = _integrate_from(family, famp, th, u, 0.0, t_eval, out, sens, False, rtol, atol, max_steps)
    return out[0, 0], out[0, 1], status


@njit(cache=True)
def residual_jac(family, famp, th, data, rtol, atol, max_steps):
    """Shooting residual R = (phi(1)-P1, phi(2)-P2) and its 4x5 Jacobian.

    Jacobian columns: the four rate parameters, then the family perturbation.
    """
    t_eval = np.empty(2)
    t_eval[0] = 1.0
    t_eval[1] = 2.0
    out, sens, status = integrate_lv(family, famp, th, data[0, 0], data[0, 1], t_eval, rtol, atol, True, max_steps)
    R = np.zeros(4)
    J = np.zeros((4, 5))
    if status != OK:
        return R, J, status
    R[0] = out[0, 0] - data[1, 0]
    R[1] = out[0, 1] - data[1, 1]
    R[2] = out[1, 0] - data[2, 0]
    R[3] = out[1, 1] - data[2, 1]
    for r in range(2):
        for c in range(5):
            J[r, c] = sens[0, r, c]
            J[2 + r, c] = sens[1, r, c]
    return R, J, status


@njit(cache=True)
def _resid_norm(family, famp, th, data, rtol, atol, max_steps):
    t_eval = np.empty(2)
    t_eval[0] = 1.0
    t_eval[1] = 2.0
    out, sens, status = integrate_lv(family, famp, th, data[0, 0], data[0, 1], t_eval, rtol, atol, False, max_steps)
    if status != OK:
        return 1e300, status
    r = (
        (out[0, 0] - data[1, 0]) ** 2
        + (out[0, 1] - data[1, 1]) ** 2
        + (out[1, 0] - data[2, 0]) ** 2
        + (out[1, 1] - data[2, 1]) ** 2
    )
    return np.sqrt(r), OK


@njit(cache=True)
def shoot_newton(family, famp, th0, data, rtol, atol, resid_rtol, max_iter, max_halvings, max_steps):
    """Damped Newton on the shooting residual with exact Jacobians.

    Returns (theta, residual, status, iterations).
    """
    th = th0.copy()
    scale = 0.0
    for j in range(3):
        s = np.sqrt(data[j, 0] ** 2 + data[j, 1] ** 2)
        if s > scale:
            scale = s
    target = resid_rtol * scale
    for it in range(max_iter):
        R, J, status = residual_jac(family, famp, th, data, rtol, atol, max_steps)
        if status != OK:
            return th, 1e300, INTEGRATION_FAILED, it
        rn = np.sqrt(R[0] ** 2 + R[1] ** 2 + R[2] ** 2 + R[3] ** 2)
        if rn <= target:
            return th, rn, CONVERGED, it
        J4 = J[:, :4].copy()
        detj = np.linalg.det(J4)
        if not np.isfinite(detj) or abs(detj) < 1e-280:
            return th, rn, SINGULAR_JACOBIAN, it
        d = np.linalg.solve(J4, -R)
        lam = 1.0
        accepted = False
        for _ in range(max_halvings):
            thn = th + lam * d
            big = 0.0
            for q in range(4):
                if abs(thn[q]) > big:
                    big = abs(thn[q])
            if big > 1e8:
                r2, st2 = 1e300, BLOWUP
            else:
                r2, st2 = _resid_norm(family, famp, thn, data, rtol, atol, max_steps)
            if st2 == OK and (r2 < rn * (1.0 - 1e-4 * lam) or r2 <= target):
                th = thn
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return th, rn, NO_CONVERGENCE, it
    rn, st = _resid_norm(family, famp, th, data, rtol, atol, max_steps)
    if st == OK and rn <= target:
        return th, rn, CONVERGED, max_iter
    return th, rn, NO_CONVERGENCE, max_iter


@njit(cache=True)
def period_lv(family, famp, th, x0, y0, t_max, rtol, atol, return_rtol, max_steps):
    """Period of the orbit through (x0, y0).

    Detects the return to the hyperplane through the start point orthogonal
    to the flow, in the flow direction, and refines the crossing by bisection
    to 1e-12 in time.  Returns (T, status); status 1 means not periodic.
    """
    du = np.empty(12)
    u = np.zeros(12)
    u[0] = x0
    u[1] = y0
    _aug_rhs(family, famp, th, u, du)
    fx0 = du[0]
    fy0 = du[1]
    fn = np.sqrt(fx0 * fx0 + fy0 * fy0)
    pscale = np.sqrt(x0 * x0 + y0 * y0)
    if fn <= 1e-12 * max(pscale, 1.0):
        return 0.0, 1  # equilibrium
    t_eval = np.empty(1)
    out = np.zeros((1, 2))
    sens = np.zeros((1, 2, 5))

    t = 0.0
    x, y = x0, y0
    g_prev = 0.0
    was_negative = False
    # march in chunks; chunk length adapts to the local speed
    dt = min(0.1, 0.05 * max(pscale, 1.0) / fn)
    while t < t_max:
        xn, yn, st = _endpoint(family, famp, th, x, y, dt, rtol, atol, max_steps)
        if st != OK:
            return 0.0, 2
        g = fx0 * (xn - x0) + fy0 * (yn - y0)
        if was_negative and g_prev < 0.0 and g >= 0.0:
            # bisect inside [t, t+dt] from the state at t
            lo = 0.0
            hi = dt
            xl, yl = x, y
            for _ in range(200):
                if hi - lo <= 1e-12 * max(t + hi, 1.0):
                    break
                mid = 0.5 * (lo + hi)
                xm, ym, st2 = _endpoint(family, famp, th, xl, yl, mid - lo, rtol, atol, max_steps)
                if st2 != OK:
                    return 0.0, 2
                gm = fx0 * (xm - x0) + fy0 * (ym - y0)
                if gm < 0.0:
                    lo, xl, yl = mid, xm, ym
                else:
                    hi = mid
            T = t + hi
            xT, yT, st3 = _endpoint(family, famp, th, xl, yl, hi - lo, rtol, atol, max_steps)
            if st3 != OK:
                return 0.0, 2
            miss = np.sqrt((xT - x0) ** 2 + (yT - y0) ** 2)
            if miss <= return_rtol * max(pscale, 1e-300):
                return T, OK
            return T, 1
        if g < 0.0:
            was_negative = True
        g_prev = g
        t += dt
        x, y = xn, yn
    return 0.0, 1


@njit(cache=True)
def closest_approach(family, famp, th, x0, y0, tx, ty, t_max, rtol, atol, max_steps):
    """Time and distance of closest approach to (tx, ty) along the flow."""
    nsamp = 400
    dt = t_max / nsamp
    x, y = x0, y0
    best_t = 0.0
    best_d = np.sqrt((x - tx) ** 2 + (y - ty) ** 2)
    t = 0.0
    for _ in range(nsamp):
        xn, yn, st = _endpoint(family, famp, th, x, y, dt, rtol, atol, max_steps)
        if st != OK:
            return best_t, best_d, st
        t += dt
        d = np.sqrt((xn - tx) ** 2 + (yn - ty) ** 2)
        if d < best_d:
            best_d = d
            best_t = t
        x, y = xn, yn
    return best_t, best_d, OK


def warmup():
    """Trigger JIT compilation of all kernels (cached across processes)."""
    th = np.array([1.0, -1.0, 1.0, -1.0])
    data = np.array([[1.0, 1.0], [2.0, 1.5], [2.45, 4.0]])
    integrate_lv(0, 0.0, th, 2.0, 1.0, np.array([0.5, 1.0]), 1e-8, 1e-10, True, 10_000)
    residual_jac(0, 0.0, th, data, 1e-8, 1e-10, 10_000)
    shoot_newton(0, 0.0, th, data, 1e-8, 1e-10, 1e-10, 3, 8, 10_000)
    period_lv(0, 0.0, th, 2.0, 1.0, 50.0, 1e-8, 1e-10, 1e-6, 10_000)
    closest_approach(0, 0.0, th, 2.0, 1.0, 1.0, 1.0, 5.0, 1e-8, 1e-10, 10_000)
