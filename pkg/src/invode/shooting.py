"""Newton shooting for the LV inverse problem: find every parameter quadruple
whose trajectory passes through three given points at times 0, 1, 2.

Multi-start combines an affine-approximation seed, level-set (periodic) seeds
and a deterministic sign/magnitude lattice.  Converged parameters are
deduplicated, trivial time-rescale families of periodic solutions are
collapsed to a canonical representative, and every reported solution is
re-verified by an independent integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import _lvkernel as lvk
from .errors import IntegrationBlowup, NoConvergence, NotPeriodic
from .linalg import real_log_branches
from .lv import (
    FAMILY_IDS,
    LVParams,
    Signature,
    lv_field,
    orbit_period,
    orbit_samples,
    signature_of,
)

NEWTON_RTOL = 1e-10       # Newton convergence, relative to the data scale
SOLUTION_RTOL = 1e-8      # accepted solution residual, relative to data scale
DEDUP_RTOL = 1e-5         # relative parameter-space dedup radius
ORBIT_MATCH_RTOL = 1e-6   # orbits closer than this (relative) are the same
CONTINUUM_RTOL = 1e-12    # |P2 - P0| below this flags the solution continuum
MAX_ITER = 100
MAX_HALVINGS = 30
SHOOT_RTOL = 1e-10
SHOOT_ATOL = 1e-12


@dataclass(frozen=True)
class InverseProblem:
    """Three positive data points at times 0, 1, 2 plus the model family."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    p2: tuple[float, float]
    family: str = "plain"
    family_param: float = 0.0

    def __post_init__(self):
        for p in (self.p0, self.p1, self.p2):
            if len(p) != 2 or not all(math.isfinite(v) and v > 0 for v in p):
                raise ValueError("data points must have positive finite coordinates")
        if self.family not in FAMILY_IDS:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "p0", tuple(float(v) for v in self.p0))
        object.__setattr__(self, "p1", tuple(float(v) for v in self.p1))
        object.__setattr__(self, "p2", tuple(float(v) for v in self.p2))

    @property
    def data(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2])

    @property
    def scale(self) -> float:
        return float(max(np.linalg.norm(p) for p in (self.p0, self.p1, self.p2)))

    @property
    def family_id(self) -> int:
        return FAMILY_IDS[self.family]

    def with_p2(self, p2) -> "InverseProblem":
        return replace(self, p2=tuple(float(v) for v in p2))

    def with_family_param(self, rho: float) -> "InverseProblem":
        return replace(self, family_param=float(rho))

    def make_params(self, rates) -> LVParams:
        return LVParams(*(float(v) for v in rates), family=self.family,
                        family_param=self.family_param)


@dataclass
class LVSolution:
    params: LVParams
    signature: Signature
    residual: float
    problem: InverseProblem
    rotation: int | None = None
    period: float | None = None
    canonical: bool = False

    @property
    def rates(self) -> np.ndarray:
        return self.params.as_array()


@dataclass
class Census:
    """Multi-start outcome counts; the nonexistence evidence for a data point."""

    attempted: int = 0
    converged: int = 0
    no_convergence: int = 0
    blowup: int = 0
    rejected: int = 0
    best_residual: float = math.inf

    def merge(self, other: "Census") -> None:
        self.attempted += other.attempted
        self.converged += other.converged
        self.no_convergence += other.no_convergence
        self.blowup += other.blowup
        self.rejected += other.rejected
        self.best_residual = min(self.best_residual, other.best_residual)


@dataclass
class SolutionSet:
    solutions: list[LVSolution]
    census: Census
    continuum: bool = False

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)

    @property
    def signatures(self) -> set[str]:
        return {str(s.signature) for s in self.solutions}


def verify_solution(problem: InverseProblem, params: LVParams,
                    rtol: float = 1e-12, atol: float = 1e-12) -> float:
    """Residual of a candidate under an integration independent of the solver.

    Uses the generic scipy path (a different integrator implementation than
    the shooting kernel) and returns max_j |phi(j) - P_j|.
    """
    fld = lv_field(params)
    th = params.as_array()
    sol = solve_ivp(lambda t, x: fld.f(x, th), (0.0, 2.0), np.array(problem.p0),
                    method="RK45", rtol=rtol, atol=atol, t_eval=[1.0, 2.0])
    if not sol.success or sol.y.shape[1] != 2:
        return math.inf
    r1 = np.linalg.norm(sol.y[:, 0] - problem.p1)
    r2 = np.linalg.norm(sol.y[:, 1] - problem.p2)
    return float(max(r1, r2))


def _kernel_residual(problem: InverseProblem, rates: np.ndarray,
                     rtol: float = 1e-12, atol: float = 1e-12) -> float:
    out, _, status = lvk.integrate_lv(
        problem.family_id, problem.family_param, rates,
        problem.p0[0], problem.p0[1], np.array([1.0, 2.0]), rtol, atol,
        False, lvk.MAX_STEPS_SHOOT,
    )
    if status != lvk.OK:
        return math.inf
    r1 = np.linalg.norm(out[0] - problem.p1)
    r2 = np.linalg.norm(out[1] - problem.p2)
    return float(max(r1, r2))


def shoot(problem: InverseProblem, theta0, *, max_iter: int = MAX_ITER,
          max_halvings: int = MAX_HALVINGS) -> LVSolution:
    """Damped Newton from one seed; raises NoConvergence or IntegrationBlowup.

    A converged iterate is accepted only if a fresh, tighter integration
    reproduces the data to SOLUTION_RTOL relative residual.
    """
    th0 = theta0.as_array() if isinstance(theta0, LVParams) else np.asarray(theta0, float)
    th, _, status, _ = lvk.shoot_newton(
        problem.family_id, problem.family_param, th0, problem.data,
        SHOOT_RTOL, SHOOT_ATOL, NEWTON_RTOL, max_iter, max_halvings,
        lvk.MAX_STEPS_SHOOT,
    )
    if status == lvk.INTEGRATION_FAILED:
        raise IntegrationBlowup(f"integration blew up during Newton from {th0!r}; last iterate {th!r}")
    if status != lvk.CONVERGED:
        raise NoConvergence(f"Newton failed to converge from {th0!r}")
    resid = _kernel_residual(problem, th)
    if resid > SOLUTION_RTOL * problem.scale:
        raise NoConvergence(
            f"converged iterate fails re-verification (residual {resid:.2e})"
        )
    params = problem.make_params(th)
    return LVSolution(params, signature_of(params), resid, problem)


def affine_seed(problem: InverseProblem) -> np.ndarray | None:
    """LV rates from the affine one-step fit of the three data points.

    The one-step affine map is underdetermined by the three points; the
    minimum-norm least-squares fit closes the two free directions.  The
    affine matrix is then matched to the LV linearization at P1.
    """
    pts = problem.data
    rows = []
    rhs = []
    for j in range(2):
        x, y = pts[j]
        rows.append([x, y, 0.0, 0.0, 1.0, 0.0])
        rows.append([0.0, 0.0, x, y, 0.0, 1.0])
        rhs.extend(pts[j + 1])
    w, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)
    one_step = np.array([
        [w[0], w[1], w[4]],
        [w[2], w[3], w[5]],
        [0.0, 0.0, 1.0],
    ])
    try:
        (log_step,) = real_log_branches(one_step, max_winding=0)
    except Exception:
        return None
    a_bar = log_step[:2, :2]
    xs, ys = problem.p1
    b1 = a_bar[0, 1] / xs
    b2 = a_bar[1, 0] / ys
    a1 = a_bar[0, 0] - b1 * ys
    a2 = a_bar[1, 1] - b2 * xs
    seed = np.array([a1, b1, b2, a2])
    return seed if np.all(np.isfinite(seed)) else None


def level_set_seeds(problem: InverseProblem) -> list[np.ndarray]:
    """Periodic-orbit seeds from matching a conserved level set to the data.

    Candidate interior equilibria around the data centroid fix the rate
    directions; the overall magnitude is set so the travel time from P0 to
    the closest approach of P1 is one.
    """
    pts = problem.data
    cx, cy = pts.mean(axis=0)
    seeds: list[np.ndarray] = []
    gfun = lambda x, xs: x - xs * math.log(x)
    for su in (0.7, 1.0, 1.3):
        for sv in (0.7, 1.0, 1.3):
            xs, ys = cx * su, cy * sv
            if xs <= 0 or ys <= 0:
                continue
            g = [gfun(p[0], xs) for p in pts]
            h = [gfun(p[1], ys) for p in pts]
            m2 = np.array([
                [g[0] - g[1], -(h[0] - h[1])],
                [g[1] - g[2], -(h[1] - h[2])],
            ])
            _, _, vt = np.linalg.svd(m2)
            b2, b1 = vt[-1]
            for sign in (1.0, -1.0):
                d1, d2 = sign * b1, sign * b2
                direction = np.array([-d1 * ys, d1, d2, -d2 * xs])
                nrm = np.abs(direction).max()
                if nrm <= 1e-12:
                    continue
                direction = direction / nrm
                t_best, d_best, status = lvk.closest_approach(
                    problem.family_id, problem.family_param, direction,
                    pts[0, 0], pts[0, 1], pts[1, 0], pts[1, 1], 40.0, 1e-8, 1e-10,
                    20_000,
                )
                if status != lvk.OK or t_best <= 1e-9:
                    continue
                if d_best > 0.5 * np.linalg.norm(pts[1]):
                    continue
                seeds.append(direction * t_best)
    return seeds


def lattice_seeds(per_axis: int = 5, offset: bool = False) -> np.ndarray:
    """Deterministic sign/magnitude lattice over the four rates."""
    mags = np.logspace(np.log10(0.25), np.log10(4.0), per_axis)
    if offset:
        mags = mags * 1.5
    signs = np.where(np.arange(per_axis) % 2 == 0, -1.0, 1.0)
    if offset:
        signs = -signs
    vals = signs * mags
    grid = np.meshgrid(vals, vals, vals, vals, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _dedup(sols: list[LVSolution]) -> list[LVSolution]:
    sols = sorted(sols, key=lambda s: (s.residual, tuple(s.rates)))
    kept: list[LVSolution] = []
    for s in sols:
        close = False
        for k in kept:
            radius = DEDUP_RTOL * max(np.linalg.norm(s.rates), np.linalg.norm(k.rates), 1e-300)
            if np.linalg.norm(s.rates - k.rates) <= radius:
                close = True
                break
        if not close:
            kept.append(s)
    return kept


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _try_period(sol: LVSolution) -> float | None:
    if sol.params.family != "plain":
        return None
    sig = str(sol.signature)
    if sig not in ("-+-+", "+-+-"):
        return None
    try:
        return orbit_period(sol.params, sol.problem.p0, t_max=500.0)
    except Exception:
        return None


def _rotation_count(beta1: float, period: float) -> int:
    # clockwise flow has beta1 > 0; counterclockwise representatives carry
    # negative indices starting at -1 for the direct passage
    full = int(math.floor(1.0 / period)) if period < 1.0 else 0
    return full if beta1 > 0 else -1 - full


def canonicalize(sols: list[LVSolution]) -> list[LVSolution]:
    """Collapse each trivial rescale family to its canonical representative.

    Periodic solutions sharing one orbit (matched by Hausdorff distance of
    orbit samples) form a family {(1 + k T) A}; the canonical member is the
    direct passage whose own period exceeds the total data span, which is the
    clockwise m=0 or counterclockwise m=-1 representative.  Non-periodic
    solutions pass through unchanged.
    """
    passthrough: list[LVSolution] = []
    periodic: list[tuple[LVSolution, float, np.ndarray]] = []
    for s in sols:
        T = _try_period(s)
        if T is None:
            passthrough.append(s)
            continue
        samples = orbit_samples(s.params, s.problem.p0, T, n=128)
        periodic.append((s, T, samples))

    groups: list[list[tuple[LVSolution, float, np.ndarray]]] = []
    for item in periodic:
        placed = False
        for grp in groups:
            ref = grp[0][2]
            diam = max(float(np.ptp(ref, axis=0).max()), 1e-300)
            if _hausdorff(item[2], ref) <= ORBIT_MATCH_RTOL * max(diam, 1.0):
                grp.append(item)
                placed = True
                break
        if not placed:
            groups.append([item])

    out = list(passthrough)
    for grp in groups:
        grp.sort(key=lambda it: (it[0].residual, tuple(it[0].rates)))
        rep, T, _ = grp[0]
        out.extend(_canonical_member(rep, T))
    return sorted(_dedup(out), key=lambda s: (s.residual, tuple(s.rates)))


def _canonical_member(rep: LVSolution, T: float) -> list[LVSolution]:
    problem = rep.problem
    gamma_plus = math.fmod(1.0, T)
    if gamma_plus == 0.0:
        gamma_plus = T
    gamma_minus = gamma_plus - T
    if min(abs(gamma_plus), abs(gamma_minus)) < 1e-9:
        return [rep]
    t_plus = T / gamma_plus
    t_minus = T / (T - gamma_plus)
    tie = abs(t_plus - 2.0) < 1e-6 and abs(t_minus - 2.0) < 1e-6
    if tie:
        # the P2 = P0 continuum: both directions have period two; keep the
        # clockwise representative by convention
        gamma = gamma_plus if rep.params.beta1 * gamma_plus > 0 else gamma_minus
    else:
        gamma = gamma_plus if t_plus > 2.0 else gamma_minus
    params = rep.params.scaled(gamma)
    resid = _kernel_residual(problem, params.as_array())
    if resid > SOLUTION_RTOL * problem.scale:
        # fell outside verification: keep the raw representative instead
        return [rep]
    T_new = T / abs(gamma)
    rot = _rotation_count(params.beta1, T_new)
    return [LVSolution(params, signature_of(params), resid, problem,
                       rotation=rot, period=T_new, canonical=True)]


def annotate_periodicity(sol: LVSolution) -> LVSolution:
    """Fill in period and rotation count for a periodic solution, if any."""
    if sol.period is not None:
        return sol
    T = _try_period(sol)
    if T is None:
        return sol
    sol.period = T
    sol.rotation = _rotation_count(sol.params.beta1, T)
    return sol


def multi_start(problem: InverseProblem, *, lattice_per_axis: int = 5,
                extra_lattice: bool = False, include_lattice: bool = True,
                include_level_sets: bool = True,
                extra_seeds=None, max_iter: int = MAX_ITER) -> SolutionSet:
    """Shoot from the deterministic seed families and assemble the solution set.

    Returns an empty set with a failure census when nothing converges; the
    census is the (numerical) evidence of nonexistence.
    """
    seeds: list[np.ndarray] = []
    aseed = affine_seed(problem)
    if aseed is not None:
        seeds.append(aseed)
    if include_level_sets:
        seeds.extend(level_set_seeds(problem))
    if extra_seeds is not None:
        seeds.extend(np.asarray(s, dtype=float) for s in extra_seeds)
    if include_lattice:
        seeds.extend(lattice_seeds(lattice_per_axis))
        if extra_lattice:
            seeds.extend(lattice_seeds(lattice_per_axis, offset=True))

    census = Census()
    found: list[LVSolution] = []
    for seed in seeds:
        census.attempted += 1
        try:
            sol = shoot(problem, seed, max_iter=max_iter)
        except IntegrationBlowup:
            census.blowup += 1
            continue
        except NoConvergence as exc:
            if "re-verification" in str(exc):
                census.rejected += 1
            else:
                census.no_convergence += 1
            continue
        census.converged += 1
        census.best_residual = min(census.best_residual, sol.residual)
        found.append(sol)

    canonical = canonicalize(_dedup(found))
    verified: list[LVSolution] = []
    for sol in canonical:
        resid = verify_solution(problem, sol.params)
        if resid <= SOLUTION_RTOL * problem.scale:
            sol.residual = resid
            verified.append(annotate_periodicity(sol))
        else:
            census.rejected += 1
    continuum = bool(
        np.linalg.norm(np.array(problem.p2) - np.array(problem.p0))
        <= CONTINUUM_RTOL * problem.scale
    )
    verified.sort(key=lambda s: (s.residual, tuple(s.rates)))
    return SolutionSet(verified, census, continuum)


def enumerate_rescales(sol: LVSolution, windings) -> list[LVSolution]:
    """The trivial rescale family gamma = (m_tilde - m) T + 1 of a periodic solution.

    Every returned member reproduces the data; the gamma = 1 entry is the
    input solution itself.
    """
    sol = annotate_periodicity(sol)
    if sol.period is None or sol.rotation is None:
        raise NotPeriodic("rescale families exist only for periodic solutions")
    out = []
    for m_tilde in windings:
        gamma = (m_tilde - sol.rotation) * sol.period + 1.0
        if abs(gamma) < 1e-12:
            continue
        params = sol.params.scaled(gamma)
        resid = _kernel_residual(sol.problem, params.as_array())
        if resid > 1e-7 * sol.problem.scale:
            raise NoConvergence(
                f"rescale member m~={m_tilde} fails verification (residual {resid:.2e})"
            )
        T_new = sol.period / abs(gamma)
        member = LVSolution(params, signature_of(params), resid, sol.problem,
                            rotation=_rotation_count(params.beta1, T_new),
                            period=T_new,
                            canonical=bool(abs(gamma - 1.0) < 1e-12 and sol.canonical))
        out.append(member)
    return out
