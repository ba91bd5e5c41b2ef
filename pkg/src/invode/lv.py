"""Lotka-Volterra vector fields, sign signatures, Hamiltonian machinery,
and the closed-form objects living on the zero-parameter boundary curves.

The rate quadruple is (a1, b1, b2, a2) in the equations

    dx/dt = a1*x + b1*x*y
    dy/dt = b2*x*y + a2*y

optionally perturbed by a field rotation (parameter p) or by saturation of
the interaction term in x (parameter eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import _lvkernel as lvk
from .errors import (
    DegenerateGeometry,
    DomainError,
    IntegrationBlowup,
    NoRoot,
    NotPeriodic,
    SingularIntegrand,
)
from .odes import VectorField

FAMILIES = ("plain", "rotated", "saturated")
FAMILY_IDS = {"plain": 0, "rotated": 1, "saturated": 2}

# |value| at or below this counts as a zero sign in signatures
SIGN_TOL = 1e-9

DYNAMICS_BY_SIGNATURE = {
    "+--+": "competitive",
    "-+-+": "predator-prey",
    "+-+-": "predator-prey",
    "++-+": "parasitic",
    "+-++": "parasitic",
    "++++": "cooperative",
    "-+++": "cooperative dependency",
    "+++-": "cooperative dependency",
    "-++-": "codependency",
}


@dataclass(frozen=True)
class LVParams:
    alpha1: float
    beta1: float
    beta2: float
    alpha2: float
    family: str = "plain"
    family_param: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        vals = (self.alpha1, self.beta1, self.beta2, self.alpha2, self.family_param)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("parameters must be finite")
        if self.family == "saturated" and self.family_param < 0:
            raise ValueError("saturation strength must be nonnegative")

    @classmethod
    def plain(cls, alpha1, beta1, beta2, alpha2):
        return cls(alpha1, beta1, beta2, alpha2)

    @classmethod
    def rotated(cls, alpha1, beta1, beta2, alpha2, p):
        return cls(alpha1, beta1, beta2, alpha2, "rotated", p)

    @classmethod
    def saturated(cls, alpha1, beta1, beta2, alpha2, eps):
        return cls(alpha1, beta1, beta2, alpha2, "saturated", eps)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.beta1, self.beta2, self.alpha2])

    def with_rates(self, rates) -> "LVParams":
        a1, b1, b2, a2 = (float(v) for v in rates)
        return replace(self, alpha1=a1, beta1=b1, beta2=b2, alpha2=a2)

    def scaled(self, gamma: float) -> "LVParams":
        return self.with_rates(gamma * self.as_array())


@dataclass(frozen=True)
class Signature:
    signs: tuple[int, int, int, int]

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" if s < 0 else "0" for s in self.signs)

    @property
    def display(self) -> str:
        return f"[{self}]"

    @property
    def dynamics(self) -> str | None:
        return DYNAMICS_BY_SIGNATURE.get(str(self))

    @property
    def has_zero(self) -> bool:
        return 0 in self.signs


def signature_of(params: LVParams, tol: float = SIGN_TOL) -> Signature:
    signs = tuple(
        0 if abs(v) <= tol else (1 if v > 0 else -1)
        for v in params.as_array()
    )
    return Signature(signs)


def lv_field(params: LVParams) -> VectorField:
    """VectorField over the four rates; the family perturbation is baked in."""
    fam = params.family
    rho = params.family_param

    if fam == "plain":

        def f(x, th):
            q = x[0] * x[1]
            return np.array([th[0] * x[0] + th[1] * q, th[2] * q + th[3] * x[1]])

        def jac_x(x, th):
            return np.array([
                [th[0] + th[1] * x[1], th[1] * x[0]],
                [th[2] * x[1], th[2] * x[0] + th[3]],
            ])

        def jac_p(x, th):
            q = x[0] * x[1]
            return np.array([[x[0], q, 0.0, 0.0], [0.0, 0.0, q, x[1]]])

    elif fam == "rotated":

        def f(x, th):
            q = x[0] * x[1]
            u = th[0] * x[0] + th[1] * q
            v = th[2] * q + th[3] * x[1]
            return np.array([u - rho * v, v + rho * u])

        def jac_x(x, th):
            ju = np.array([th[0] + th[1] * x[1], th[1] * x[0]])
            jv = np.array([th[2] * x[1], th[2] * x[0] + th[3]])
            return np.vstack([ju - rho * jv, jv + rho * ju])

        def jac_p(x, th):
            q = x[0] * x[1]
            gu = np.array([x[0], q, 0.0, 0.0])
            gv = np.array([0.0, 0.0, q, x[1]])
            return np.vstack([gu - rho * gv, gv + rho * gu])

    else:  # saturated

        def f(x, th):
            q = x[0] * x[1] / (rho * x[0] + 1.0)
            return np.array([th[0] * x[0] + th[1] * q, th[2] * q + th[3] * x[1]])

        def jac_x(x, th):
            w = 1.0 / (rho * x[0] + 1.0)
            qx = x[1] * w * w
            qy = x[0] * w
            return np.array([
                [th[0] + th[1] * qx, th[1] * qy],
                [th[2] * qx, th[3] + th[2] * qy],
            ])

        def jac_p(x, th):
            q = x[0] * x[1] / (rho * x[0] + 1.0)
            return np.array([[x[0], q, 0.0, 0.0], [0.0, 0.0, q, x[1]]])

    return VectorField(2, 4, f, jac_x, jac_p,
                       kernel_id=FAMILY_IDS[fam], kernel_param=rho)


def hamiltonian(params: LVParams, x: float, y: float) -> float:
    """Conserved quantity a2*ln x + b2*x - a1*ln y - b1*y of the plain family."""
    if params.family != "plain":
        raise DomainError("the Hamiltonian is defined for the plain family only")
    if x <= 0 or y <= 0:
        raise DomainError("the Hamiltonian is defined for positive coordinates only")
    return (params.alpha2 * math.log(x) + params.beta2 * x
            - params.alpha1 * math.log(y) - params.beta1 * y)


def equilibrium(params: LVParams):
    """Interior equilibrium (-a2/b2, -a1/b1), or None when b1*b2 = 0."""
    if params.family != "plain":
        raise DomainError("equilibrium formula applies to the plain family only")
    if params.beta1 == 0.0 or params.beta2 == 0.0:
        return None
    return np.array([-params.alpha2 / params.beta2, -params.alpha1 / params.beta1])


@dataclass(frozen=True)
class LevelSetGeometry:
    """Constants of the orbit's level set when a1 = 0: y = r*(x - x*ln x - c_bar)."""

    r: float
    c_bar: float


def hamiltonian_ratio(p0, p1, x_star: float) -> LevelSetGeometry:
    """Rate ratio r = b2/b1 and offset from two points on one a1 = 0 orbit."""
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    if min(x0, x1, y0, y1) <= 0:
        raise DomainError("data coordinates must be positive")
    lx = math.log(x1 / x0)
    den = x1 - x0 - x_star * lx
    scale = max(abs(x1 - x0), abs(x_star * lx), 1e-300)
    if abs(den) <= 1e-12 * scale:
        raise DegenerateGeometry("level-set denominator vanishes for this x*")
    r = (y1 - y0) / den
    if y1 == y0:
        return LevelSetGeometry(0.0, math.nan)
    c_bar = ((x0 * y1 - y0 * x1) / (y1 - y0)
             - x_star * (math.log(x0) * y1 - y0 * math.log(x1)) / (y1 - y0))
    return LevelSetGeometry(r, c_bar)


def beta1_zero_solution(p0, p1, y2: float) -> LVParams:
    """Exact parameters for data whose third point sits on the b1 = 0 line.

    With b1 = 0 the x-equation decouples, forcing x2 = x1^2/x0; the remaining
    rates follow in closed form from (P0, P1, y2).  The returned system passes
    through P1 at t=1 and (x1^2/x0, y2) at t=2.
    """
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    if min(x0, y0, x1, y1, y2) <= 0:
        raise DomainError("coordinates must be positive")
    if abs(x1 - x0) <= 1e-12 * max(x0, x1):
        raise DegenerateGeometry("x0 = x1 leaves the x-equation unidentifiable")
    lx = math.log(x1 / x0)
    alpha1 = lx
    beta2 = x0 / (x1 - x0) ** 2 * lx * math.log(y0 * y2 / y1**2)
    alpha2 = (x0 / (x0 - x1) * math.log(y2 / y1)
              - x1 / (x0 - x1) * math.log(y1 / y0))
    return LVParams(alpha1, 0.0, beta2, alpha2)


def beta2_zero_solution(p0, p1, x2: float) -> LVParams:
    """Counterpart of beta1_zero_solution on the b2 = 0 line y = y1^2/y0."""
    sw = beta1_zero_solution((p0[1], p0[0]), (p1[1], p1[0]), x2)
    # swapping x and y swaps the roles (a1,b1,b2,a2) -> (a2,b2,b1,a1)
    return LVParams(sw.alpha2, sw.beta2, sw.beta1, sw.alpha1)


def alpha_zero_intersection(p0, p1):
    """Crossing point of the a1 = 0 and a2 = 0 curves, or None.

    The trajectory there is the straight line through P0 and P1; the point
    exists in the first quadrant only when a + b - ab > 0 for a = x1/x0,
    b = y1/y0.
    """
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    if min(x0, y0, x1, y1) <= 0:
        raise DomainError("coordinates must be positive")
    a = x1 / x0
    b = y1 / y0
    factor = a + b - a * b
    if factor <= 0:
        return None
    return np.array([x1 * a / factor, y1 * b / factor])


def _alpha1_zero_integrand(geo: LevelSetGeometry, x_star: float):
    def den(x):
        return x - x_star * math.log(x) - geo.c_bar

    def f(x):
        return 1.0 / (x * den(x))

    return den, f


def alpha1_zero_point(p0, p1, x_star: float) -> np.ndarray:
    """Point of the a1 = 0 curve selected by the level-set parameter x*.

    Matches the travel-time quadrature between consecutive data points: the
    integral of dx/(x*(x - x*ln x - c_bar)) over [x1, x2] must equal its value
    over [x0, x1]; x2 is found by root bracketing on the difference.
    """
    x0 = float(p0[0])
    x1 = float(p1[0])
    geo = hamiltonian_ratio(p0, p1, x_star)
    den, f = _alpha1_zero_integrand(geo, x_star)
    lo, hi = min(x0, x1), max(x0, x1)
    grid = np.linspace(lo, hi, 64)
    dvals = np.array([den(x) for x in grid])
    if np.any(np.abs(dvals) <= 1e-12 * max(abs(geo.c_bar), hi)) or np.any(dvals[0] * dvals < 0):
        raise SingularIntegrand("level-set denominator vanishes between x0 and x1")

    i01 = quad(f, x0, x1, epsabs=1e-12, epsrel=1e-10, limit=200)[0]

    def gap(x2):
        return quad(f, x1, x2, epsabs=1e-12, epsrel=1e-10, limit=200)[0] - i01

    step = x1 - x0
    # locate where the denominator next vanishes in the direction of travel,
    # if anywhere: the quadrature diverges there, so a root precedes it
    x_sing = None
    probe = x1
    for _ in range(200):
        nxt = probe + step
        if den(nxt) * den(x1) < 0:
            x_sing = brentq(den, probe, nxt, xtol=1e-14)
            break
        probe = nxt
        if abs(probe) > 1e8 * max(1.0, abs(x1)):
            break

    hi_cand = None
    if x_sing is None:
        cur = x1 + step
        for _ in range(200):
            if gap(cur) >= 0:
                hi_cand = cur
                break
            cur += step * 1.6
            if abs(cur) > 1e10:
                break
    else:
        for k in range(1, 60):
            cand = x_sing - (x_sing - x1) * 0.5**k
            if gap(cand) >= 0:
                hi_cand = cand
                break
    if hi_cand is None:
        raise NoRoot("travel-time integral never reaches the required value")

    lo_b = x1 + 1e-13 * max(1.0, abs(x1)) * (1 if step > 0 else -1)
    a, b = (lo_b, hi_cand) if lo_b < hi_cand else (hi_cand, lo_b)
    x2 = brentq(gap, a, b, xtol=1e-12, rtol=1e-12)
    y2 = geo.r * den(x2)
    return np.array([x2, y2])


def orbit_period(params: LVParams, x0, t_max: float = 1e3,
                 rtol: float = 1e-12, atol: float = 1e-12,
                 return_rtol: float = 1e-8) -> float:
    """Fast-path period of the orbit through x0 for any LV family."""
    T, status = lvk.period_lv(
        FAMILY_IDS[params.family], params.family_param, params.as_array(),
        float(x0[0]), float(x0[1]), t_max, rtol, atol, return_rtol,
        lvk.MAX_STEPS_DEFAULT,
    )
    if status == lvk.OK:
        return T
    if status == 2:
        raise IntegrationBlowup("integration failed while measuring the period")
    raise NotPeriodic("trajectory does not return to its start point")


def orbit_samples(params: LVParams, x0, period: float, n: int = 512,
                  rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """n states equally spaced in time along one period of the orbit."""
    ts = np.arange(1, n + 1) * (period / n)
    out, _, status = lvk.integrate_lv(
        FAMILY_IDS[params.family], params.family_param, params.as_array(),
        float(x0[0]), float(x0[1]), ts, rtol, atol, False, lvk.MAX_STEPS_DEFAULT,
    )
    if status != lvk.OK:
        raise IntegrationBlowup("integration failed while sampling the orbit")
    return out


def orbit_convexity_check(params: LVParams, x0, n_samples: int = 512) -> bool:
    """True when the sampled periodic orbit forms a convex polygon.

    The cross-product tolerance is 1e-9 relative to the squared orbit
    diameter, so nearly-straight arcs do not fail on roundoff.
    """
    T = orbit_period(params, x0)
    pts = orbit_samples(params, x0, T, n=n_samples)
    d = pts.max(axis=0) - pts.min(axis=0)
    diam2 = float(d @ d)
    if diam2 == 0.0:
        raise NotPeriodic("orbit has zero extent")
    e = np.roll(pts, -1, axis=0) - pts
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    s = 1.0 if cross.sum() >= 0 else -1.0
    return bool(np.min(s * cross) >= -1e-9 * diam2)
