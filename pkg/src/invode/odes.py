"""Adaptive trajectory integration with parameter sensitivities and period detection.

The generic path rides on scipy's embedded Runge-Kutta 5(4) pair with dense
output.  Vector fields that declare a compiled kernel id get routed to the
specialized fast path for sensitivity integration and period detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import _lvkernel as lvk
from .errors import IntegrationBlowup, NotPeriodic, StateBlowup, StepUnderflow

STATE_LIMIT = 1e12
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


@dataclass(frozen=True)
class VectorField:
    """Autonomous field f(x, theta) with analytic state and parameter Jacobians."""

    dim: int
    n_params: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_p: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kernel_id: Optional[int] = None
    kernel_param: float = 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    rtol: float
    atol: float
    _dense: object = field(default=None, repr=False)

    def at(self, t):
        """Dense-output state at time(s) t within the integrated span."""
        if self._dense is None:
            raise ValueError("trajectory carries no dense output")
        val = self._dense(t)
        return val.T if np.ndim(t) else val


@dataclass
class SensitivityBundle:
    times: np.ndarray
    states: np.ndarray
    sensitivities: np.ndarray  # (m, n, q): d state_i / d theta_j at each time


def _blowup_event(t, x):
    return float(np.linalg.norm(x)) - STATE_LIMIT


_blowup_event.terminal = True
_blowup_event.direction = 1


def integrate(field: VectorField, x0, theta, t_end: float,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> Trajectory:
    """Dense-output trajectory of the field on [0, t_end].

    Raises StateBlowup when the state norm passes 1e12 and StepUnderflow when
    the controller cannot keep the error within tolerance.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sol = solve_ivp(
        lambda t, x: field.f(x, theta),
        (0.0, t_end),
        x0,
        method="RK45",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=[_blowup_event],
    )
    if sol.status == 1:
        raise StateBlowup(f"state norm exceeded {STATE_LIMIT:g} at t={sol.t[-1]:.6g}")
    if sol.status < 0:
        if sol.t.size and np.linalg.norm(sol.y[:, -1]) > 1e10:
            raise StateBlowup(sol.message)
        raise StepUnderflow(sol.message)
    return Trajectory(sol.t, sol.y.T, rtol, atol, _dense=sol.sol)


def integrate_with_sensitivities(field: VectorField, x0, theta, sample_times,
                                 rtol: float = DEFAULT_RTOL,
                                 atol: float = DEFAULT_ATOL) -> SensitivityBundle:
    """Joint integration of the state and dS/dt = (df/dx) S + df/dtheta, S(0)=0."""
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ts = np.asarray(sample_times, dtype=float)
    if ts.size == 0:
        raise ValueError("sample_times must be non-empty")
    if np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise ValueError("sample_times must be increasing and start at t >= 0")

    if field.kernel_id is not None and field.dim == 2:
        out, sens, status = lvk.integrate_lv(
            field.kernel_id, field.kernel_param, theta, x0[0], x0[1], ts, rtol, atol,
            True, lvk.MAX_STEPS_DEFAULT,
        )
        if status == lvk.BLOWUP:
            raise StateBlowup("state norm exceeded limit during sensitivity integration")
        if status != lvk.OK:
            raise StepUnderflow("step size underflow during sensitivity integration")
        return SensitivityBundle(ts, out, sens[:, :, : field.n_params].copy())

    n, q = field.dim, field.n_params

    def rhs(t, u):
        x = u[:n]
        s = u[n:].reshape(n, q)
        du = np.empty_like(u)
        du[:n] = field.f(x, theta)
        du[n:] = (field.jac_x(x, theta) @ s + field.jac_p(x, theta)).ravel()
        return du

    u0 = np.zeros(n + n * q)
    u0[:n] = x0
    span_end = ts[-1] if ts[-1] > 0 else 1e-12
    sol = solve_ivp(rhs, (0.0, span_end), u0, method="RK45", rtol=rtol, atol=atol,
                    t_eval=ts if ts[-1] > 0 else None, events=[_blowup_event])
    if sol.status == 1:
        raise StateBlowup("state norm exceeded limit during sensitivity integration")
    if sol.status < 0:
        raise StepUnderflow(sol.message)
    if ts[-1] > 0:
        states = sol.y[:n].T
        sens = sol.y[n:].T.reshape(len(ts), n, q)
    else:  # only t=0 requested
        states = np.tile(x0, (len(ts), 1))
        sens = np.zeros((len(ts), n, q))
    return SensitivityBundle(ts, states, sens)


def find_period(field: VectorField, x0, theta, t_max: float = 1e3,
                rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                return_rtol: float = 1e-8) -> float:
    """Period of the orbit through x0.

    The return is detected as the second same-direction crossing of the
    hyperplane through x0 orthogonal to the local flow, refined in time, and
    accepted only if the state actually returns to x0 within return_rtol.
    """
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    f0 = np.asarray(field.f(x0, theta), dtype=float)
    scale = max(float(np.linalg.norm(x0)), 1.0)
    if np.linalg.norm(f0) <= 1e-12 * scale:
        raise NotPeriodic("starting point is an equilibrium")

    if field.kernel_id is not None and field.dim == 2:
        T, status = lvk.period_lv(
            field.kernel_id, field.kernel_param, theta, x0[0], x0[1],
            t_max, rtol, atol, return_rtol, lvk.MAX_STEPS_DEFAULT,
        )
        if status == lvk.OK:
            return T
        if status == 2:
            raise IntegrationBlowup("integration failed while searching for a return")
        raise NotPeriodic("no return to the start point within the search horizon")

    # Non-terminal crossing event: g(0) = 0 exactly, so a terminal event
    # would fire at the start and never advance.
    def crossing(t, x):
        return float(f0 @ (x - x0))

    crossing.direction = 1

    chunk = 20.0
    t_base = 0.0
    x_cur = x0.copy()
    while t_base < t_max:
        sol = solve_ivp(
            lambda t, x: field.f(x, theta),
            (0.0, min(chunk, t_max - t_base)),
            x_cur,
            method="RK45",
            rtol=rtol,
            atol=atol,
            dense_output=True,
            events=[crossing, _blowup_event],
        )
        if sol.status < 0:
            raise IntegrationBlowup(sol.message)
        if sol.t_events[1].size:
            raise IntegrationBlowup("state blew up while searching for a return")
        hits = [te for te in sol.t_events[0] if t_base + te > 1e-9]
        if hits:
            te = hits[0]
            T = t_base + te
            xT = sol.sol(te)
            if np.linalg.norm(xT - x0) <= return_rtol * max(np.linalg.norm(x0), 1e-300):
                return float(T)
            raise NotPeriodic(
                f"plane crossing at t={T:.6g} misses the start point by "
                f"{np.linalg.norm(xT - x0):.3e}"
            )
        t_base += sol.t[-1]
        x_cur = sol.y[:, -1]
    raise NotPeriodic(f"no return within t={t_max:g}")
