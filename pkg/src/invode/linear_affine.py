"""Exact inverse solvers for linear and affine systems from minimal data.

Both solvers build the one-step solution matrix from shifted data windows,
take real logarithm branches, and verify each candidate against the data.
The affine case works on the augmented system whose matrix carries the
offset in its last column and zeros in its bottom row; log branches that
break that structure are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .errors import (
    DegenerateSpectrum,
    LinearlyDependentData,
    NoRealSolution,
    SingularMatrix,
    StructureViolation,
)
from .linalg import (
    SpectralClass,
    Spectrum,
    classify_spectrum,
    invert,
    real_log_branches_with_windings,
    spectrum,
)

# every returned solution must reproduce the data this tightly
DATA_VERIFY_RTOL = 1e-7
# the affine log's bottom row must vanish to this, relative to the log norm
STRUCTURE_RTOL = 1e-8
# eigenvalue tolerance for stability labels
STABILITY_TOL = 1e-9


@dataclass(frozen=True)
class TimedDataSet:
    """Ordered data points with timestamps; default times are 0, 1, 2, ..."""

    points: np.ndarray
    times: np.ndarray

    @classmethod
    def from_points(cls, points, times=None) -> "TimedDataSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if times is None:
            times = np.arange(pts.shape[0], dtype=float)
        ts = np.asarray(times, dtype=float)
        if ts.shape != (pts.shape[0],):
            raise ValueError("one timestamp per point required")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(pts)):
            raise ValueError("data points must be finite")
        return cls(pts, ts)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dt(self) -> float:
        """Common spacing; only uniformly spaced data sets are invertible here."""
        steps = np.diff(self.times)
        if np.any(np.abs(steps - steps[0]) > 1e-9 * abs(steps[0])):
            raise ValueError("data points are not equally spaced in time")
        return float(steps[0])


class StabilityLabel(Enum):
    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    STABLE_SPIRAL = "stable_spiral"
    UNSTABLE_SPIRAL = "unstable_spiral"
    SADDLE = "saddle"
    CENTER = "center"
    DEGENERATE = "degenerate"


class P2Region(Enum):
    DNE = "dne"
    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    STABLE_SPIRAL = "stable_spiral"
    UNSTABLE_SPIRAL = "unstable_spiral"
    SADDLE = "saddle"
    BOUNDARY = "boundary"


class RegimeLabel(Enum):
    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    STABLE_SPIRAL = "stable_spiral"
    UNSTABLE_SPIRAL = "unstable_spiral"
    SADDLE = "saddle"
    RIVER = "river"
    PARABOLIC = "parabolic"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class LinearSolution:
    matrix: np.ndarray
    initial: np.ndarray
    branch: int
    phi_class: SpectralClass
    stability: StabilityLabel


@dataclass(frozen=True)
class AffineSolution:
    matrix: np.ndarray
    offset: np.ndarray
    initial: np.ndarray
    branch: int
    regime: RegimeLabel


@dataclass(frozen=True)
class LinearInversion:
    """Solution list plus the existence/uniqueness report for one data set."""

    phi: np.ndarray
    phi_spectrum: Spectrum
    phi_class: SpectralClass
    solutions: tuple[LinearSolution, ...]
    exists: bool
    unique: bool
    message: str = ""

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]


def stability_of(matrix, tol: float = STABILITY_TOL) -> StabilityLabel:
    """Fixed-point label of dx/dt = A x from the spectrum of A."""
    w = np.linalg.eigvals(np.asarray(matrix, dtype=float))
    scale = max(np.abs(w).max(), 1e-300)
    re = w.real
    has_complex = bool(np.any(np.abs(w.imag) > tol * scale))
    near_zero = np.abs(re) <= tol * scale
    if np.all(near_zero):
        return StabilityLabel.CENTER if has_complex else StabilityLabel.DEGENERATE
    if np.any(near_zero):
        return StabilityLabel.DEGENERATE
    if np.all(re < 0):
        return StabilityLabel.STABLE_SPIRAL if has_complex else StabilityLabel.STABLE_NODE
    if np.all(re > 0):
        return StabilityLabel.UNSTABLE_SPIRAL if has_complex else StabilityLabel.UNSTABLE_NODE
    return StabilityLabel.SADDLE


def _window_matrices(d: TimedDataSet, width: int) -> tuple[np.ndarray, np.ndarray]:
    cols = d.points.T
    x0 = cols[:, :width]
    x1 = cols[:, 1 : width + 1]
    return x0, x1


def phi_from_data(d: TimedDataSet) -> np.ndarray:
    """One-step solution matrix from n+1 points in dimension n."""
    if d.size != d.n + 1:
        raise ValueError(f"need exactly {d.n + 1} points in dimension {d.n}, got {d.size}")
    x0, x1 = _window_matrices(d, d.n)
    try:
        x0_inv = invert(x0)
    except SingularMatrix as exc:
        raise LinearlyDependentData(f"data window is linearly dependent: {exc}") from exc
    return x1 @ x0_inv


def _verified(matrix: np.ndarray, d: TimedDataSet) -> bool:
    """Does exp((t_j - t_0) * matrix) @ x_0 reproduce every data point?"""
    step = expm(matrix * d.dt)
    x = d.points[0].copy()
    for j in range(1, d.size):
        x = step @ x
        ref = d.points[j]
        if np.linalg.norm(x - ref) > DATA_VERIFY_RTOL * max(np.linalg.norm(ref), 1e-300):
            return False
    return True


def solve_linear(d: TimedDataSet, max_winding: int = 0) -> LinearInversion:
    """All real parameter matrices whose flow interpolates the data.

    One solution per real log branch of the one-step matrix.  When that
    matrix has a negative eigenvalue of odd multiplicity the result is an
    empty, non-existence report rather than an error.
    """
    phi = phi_from_data(d)
    sp = spectrum(phi)
    cls = classify_spectrum(sp)
    if cls is SpectralClass.NEGATIVE_ODD_MULTIPLICITY:
        return LinearInversion(
            phi, sp, cls, (), exists=False, unique=False,
            message="no real solution: one-step matrix has a negative "
                    "eigenvalue of odd multiplicity",
        )
    if cls is SpectralClass.ZERO_EIGENVALUE:
        raise LinearlyDependentData("one-step matrix is singular")
    if cls is SpectralClass.DEGENERATE:
        raise DegenerateSpectrum(
            "one-step matrix is defective or has negative eigenvalues of even multiplicity"
        )
    dt = d.dt
    sols = []
    branches = real_log_branches_with_windings(phi, max_winding)
    single_pair = len(branches[0][0]) == 1
    for idx, (winds, log_phi) in enumerate(branches):
        a = log_phi / dt
        if not _verified(a, d):
            continue
        branch = winds[0] if single_pair else idx
        sols.append(
            LinearSolution(a, d.points[0].copy(), branch, cls, stability_of(a))
        )
    unique = cls is SpectralClass.DISTINCT_POSITIVE_REAL and len(sols) == 1
    return LinearInversion(phi, sp, cls, tuple(sols), exists=bool(sols), unique=unique)


def classify_linear_p2(p0, p1, p2) -> P2Region:
    """Region of the last data point in the two-dimensional linear diagram."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    x0 = np.column_stack([p0, p1])
    sc = np.abs(x0).max()
    if sc == 0 or abs(np.linalg.det(x0)) <= 1e-13 * sc**2:
        raise LinearlyDependentData("first two points are linearly dependent")
    d = TimedDataSet.from_points([p0, p1, p2])
    phi = phi_from_data(d)
    cls = classify_spectrum(spectrum(phi))
    if cls is SpectralClass.NEGATIVE_ODD_MULTIPLICITY:
        return P2Region.DNE
    if cls in (SpectralClass.ZERO_EIGENVALUE, SpectralClass.DEGENERATE):
        return P2Region.BOUNDARY
    result = solve_linear(d, max_winding=0)
    if not result.solutions:
        return P2Region.BOUNDARY
    label = result.solutions[0].stability
    mapping = {
        StabilityLabel.STABLE_NODE: P2Region.STABLE_NODE,
        StabilityLabel.UNSTABLE_NODE: P2Region.UNSTABLE_NODE,
        StabilityLabel.STABLE_SPIRAL: P2Region.STABLE_SPIRAL,
        StabilityLabel.UNSTABLE_SPIRAL: P2Region.UNSTABLE_SPIRAL,
        StabilityLabel.SADDLE: P2Region.SADDLE,
    }
    return mapping.get(label, P2Region.BOUNDARY)


def transform_linear(sol: LinearSolution, s) -> LinearSolution:
    """Image of a solution under the coordinate change x -> S x."""
    s = np.asarray(s, dtype=float)
    s_inv = invert(s)
    return LinearSolution(
        s @ sol.matrix @ s_inv,
        s @ sol.initial,
        sol.branch,
        sol.phi_class,
        sol.stability,
    )


def classify_affine_regime(sol: AffineSolution, tol: float = 1e-10) -> RegimeLabel:
    """Flow regime of dx/dt = A x + c, deterministic at a singular-value tolerance."""
    a = np.asarray(sol.matrix, dtype=float)
    c = np.asarray(sol.offset, dtype=float)
    svals = np.linalg.svd(a, compute_uv=False)
    smax = svals[0] if svals.size else 0.0
    if smax <= 1e-300:
        return RegimeLabel.RIVER if np.linalg.norm(c) > 0 else RegimeLabel.DEGENERATE
    if svals[-1] > tol * smax:
        label = stability_of(a)
        mapping = {
            StabilityLabel.STABLE_NODE: RegimeLabel.STABLE_NODE,
            StabilityLabel.UNSTABLE_NODE: RegimeLabel.UNSTABLE_NODE,
            StabilityLabel.STABLE_SPIRAL: RegimeLabel.STABLE_SPIRAL,
            StabilityLabel.UNSTABLE_SPIRAL: RegimeLabel.UNSTABLE_SPIRAL,
            StabilityLabel.SADDLE: RegimeLabel.SADDLE,
        }
        return mapping.get(label, RegimeLabel.DEGENERATE)
    # singular: does a fixed point exist at all?
    t, res, *_ = np.linalg.lstsq(a, c, rcond=None)
    in_range = np.linalg.norm(a @ t - c) <= tol * max(np.linalg.norm(c), smax)
    if in_range:
        return RegimeLabel.DEGENERATE
    w = np.linalg.eigvals(a)
    if np.any(np.abs(w) > tol * smax):
        return RegimeLabel.RIVER
    return RegimeLabel.PARABOLIC


def solve_affine(d: TimedDataSet, max_winding: int = 0) -> list[AffineSolution]:
    """All (A, c) whose affine flow interpolates n+2 points in dimension n.

    Log branches of the augmented one-step matrix qualify only when their
    bottom row vanishes; a spectrum blocking every real log raises
    NoRealSolution, and a structure break on every branch raises
    StructureViolation.
    """
    n = d.n
    if d.size != n + 2:
        raise ValueError(f"need exactly {n + 2} points in dimension {n}, got {d.size}")
    z = np.hstack([d.points, np.ones((d.size, 1))])
    zcols = z.T
    z0 = zcols[:, : n + 1]
    z1 = zcols[:, 1 : n + 2]
    try:
        z0_inv = invert(z0)
    except SingularMatrix as exc:
        raise LinearlyDependentData(f"augmented data window is singular: {exc}") from exc
    psi = z1 @ z0_inv
    sp = spectrum(psi)
    cls = classify_spectrum(sp)
    if cls is SpectralClass.NEGATIVE_ODD_MULTIPLICITY:
        raise NoRealSolution(
            "augmented one-step matrix has a negative eigenvalue of odd multiplicity"
        )
    if cls is SpectralClass.ZERO_EIGENVALUE:
        raise LinearlyDependentData("augmented one-step matrix is singular")
    dt = d.dt
    branches = real_log_branches_with_windings(psi, max_winding)
    sols = []
    for idx, (winds, log_psi) in enumerate(branches):
        norm = np.linalg.norm(log_psi)
        if np.linalg.norm(log_psi[n, :]) > STRUCTURE_RTOL * max(norm, 1e-300):
            continue
        b_aug = log_psi / dt
        a = b_aug[:n, :n]
        c = b_aug[:n, n]
        if not _affine_verified(b_aug, z, d):
            continue
        sol = AffineSolution(a, c, d.points[0].copy(), idx, RegimeLabel.DEGENERATE)
        sol = AffineSolution(a, c, d.points[0].copy(), idx, classify_affine_regime(sol))
        sols.append(sol)
    if not sols:
        raise StructureViolation("no real log branch preserves the affine block structure")
    return sols


def _affine_verified(b_aug: np.ndarray, z: np.ndarray, d: TimedDataSet) -> bool:
    step = expm(b_aug * d.dt)
    zz = z[0].copy()
    for j in range(1, d.size):
        zz = step @ zz
        ref = z[j]
        if np.linalg.norm(zz - ref) > DATA_VERIFY_RTOL * max(np.linalg.norm(ref), 1e-300):
            return False
    return True


def transform_affine(sol: AffineSolution, s, r) -> AffineSolution:
    """Image of a solution under the coordinate change x -> S x + r."""
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    s_inv = invert(s)
    a_new = s @ sol.matrix @ s_inv
    c_new = s @ (sol.offset - sol.matrix @ s_inv @ r)
    out = AffineSolution(a_new, c_new, s @ sol.initial + r, sol.branch, sol.regime)
    return AffineSolution(a_new, c_new, out.initial, sol.branch, classify_affine_regime(out))
