"""Dense small-matrix primitives: inversion, spectra, real matrix logarithms.

The real log is built from a complex eigendecomposition with explicit
winding-number enumeration on complex-conjugate pairs, which is what makes
multi-branch inversion of one-step solution matrices possible.  Only
diagonalizable matrices are supported (see ``real_log_branches``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .errors import (
    DegenerateSpectrum,
    NonConvergence,
    NoRealLog,
    SingularMatrix,
    ZeroEigenvalue,
)

# Eigenvector matrices with condition number above this are treated as
# rank-deficient: the matrix is classified non-diagonalizable.
DIAGONALIZABLE_COND_MAX = 1e8

# Relative tolerance deciding "zero" and "real axis" for eigenvalues.
SPECTRUM_TOL = 1e-9

# Every returned log branch L must satisfy ||exp(L) - m||_F <= this * ||m||_F.
LOG_VERIFY_RTOL = 1e-9


class SpectralClass(Enum):
    ALL_POSITIVE_OR_COMPLEX = "all_positive_or_complex"
    DISTINCT_POSITIVE_REAL = "distinct_positive_real"
    NEGATIVE_ODD_MULTIPLICITY = "negative_odd_multiplicity"
    ZERO_EIGENVALUE = "zero_eigenvalue"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues grouped by multiplicity, plus a diagonalizability flag."""

    eigenvalues: tuple[complex, ...]
    multiplicities: tuple[int, ...]
    diagonalizable: bool

    def __post_init__(self):
        if sum(self.multiplicities) < 1:
            raise ValueError("empty spectrum")

    @property
    def dimension(self) -> int:
        return sum(self.multiplicities)


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def invert(m) -> np.ndarray:
    """Inverse of a small dense matrix.

    Raises SingularMatrix when the determinant is negligible relative to the
    entry scale, instead of returning an inverse dominated by roundoff.
    """
    a = _as_square(m)
    n = a.shape[0]
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    det = np.linalg.det(a)
    if abs(det) <= 1e-13 * scale**n:
        raise SingularMatrix(f"determinant {det:.3e} below tolerance for scale {scale:.3e}")
    return np.linalg.inv(a)


def spectrum(m, tol: float = SPECTRUM_TOL) -> Spectrum:
    """Eigenvalues with multiplicities and a diagonalizability flag.

    Eigenvalues closer than ``tol`` (relative to the spectral scale) are
    merged into one entry with summed multiplicity.  The flag is False when
    the eigenvector matrix is ill-conditioned beyond DIAGONALIZABLE_COND_MAX.
    """
    a = _as_square(m)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NonConvergence(str(exc)) from exc
    scale = max(np.abs(w).max(), 1e-300)
    # scrub tiny imaginary parts so conjugate bookkeeping stays exact
    w = np.where(np.abs(w.imag) <= tol * scale, w.real + 0j, w)

    order = np.lexsort((w.imag, w.real))
    w = w[order]
    values: list[complex] = []
    counts: list[int] = []
    for lam in w:
        if values and abs(lam - values[-1]) <= tol * scale:
            counts[-1] += 1
        else:
            values.append(complex(lam))
            counts.append(1)
    diag = bool(np.linalg.cond(v) <= DIAGONALIZABLE_COND_MAX)
    return Spectrum(tuple(values), tuple(counts), diag)


def classify_spectrum(s: Spectrum, tol: float = SPECTRUM_TOL) -> SpectralClass:
    """Deterministic classification of a real matrix spectrum.

    Most specific tag wins; a negative real eigenvalue of odd multiplicity
    takes precedence over degeneracy.
    """
    scale = max((abs(v) for v in s.eigenvalues), default=0.0)
    scale = max(scale, 1e-300)
    neg_odd = False
    neg_even = False
    zero = False
    all_real = True
    for lam, mult in zip(s.eigenvalues, s.multiplicities):
        if abs(lam) <= tol * scale:
            zero = True
            continue
        if abs(lam.imag) <= tol * scale:
            if lam.real < 0:
                if mult % 2 == 1:
                    neg_odd = True
                else:
                    neg_even = True
        else:
            all_real = False
    if neg_odd:
        return SpectralClass.NEGATIVE_ODD_MULTIPLICITY
    if zero:
        return SpectralClass.ZERO_EIGENVALUE
    if neg_even or not s.diagonalizable:
        return SpectralClass.DEGENERATE
    if all_real and all(m == 1 for m in s.multiplicities):
        return SpectralClass.DISTINCT_POSITIVE_REAL
    return SpectralClass.ALL_POSITIVE_OR_COMPLEX


def _pair_conjugates(w: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """Indices (i, j) of conjugate eigenvalue pairs, i carrying imag > 0."""
    scale = max(np.abs(w).max(), 1e-300)
    pos = [i for i in range(len(w)) if w[i].imag > tol * scale]
    neg = set(i for i in range(len(w)) if w[i].imag < -tol * scale)
    pairs = []
    for i in pos:
        best, best_d = -1, np.inf
        for j in neg:
            d = abs(np.conj(w[i]) - w[j])
            if d < best_d:
                best, best_d = j, d
        if best < 0 or best_d > 1e-6 * scale:
            raise NonConvergence("could not pair complex conjugate eigenvalues")
        pairs.append((i, best))
        neg.remove(best)
    if neg:
        raise NonConvergence("unpaired complex eigenvalues")
    return pairs


def real_log_branches_with_windings(
    m, max_winding: int = 0, tol: float = SPECTRUM_TOL
) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """All real logarithms of ``m`` reachable by winding the complex pairs.

    Returns (windings, L) pairs where ``windings`` holds one integer per
    complex-conjugate eigenvalue pair and exp(L) = m to LOG_VERIFY_RTOL.
    The principal branch (all windings zero) comes first.
    """
    a = _as_square(m)
    w, v = np.linalg.eig(a)
    scale = max(np.abs(w).max(), 1e-300)
    if np.linalg.cond(v) > DIAGONALIZABLE_COND_MAX:
        raise DegenerateSpectrum("matrix is not diagonalizable at tolerance")
    if np.any(np.abs(w) <= tol * scale):
        raise ZeroEigenvalue("zero eigenvalue admits no logarithm")
    real_mask = np.abs(w.imag) <= tol * scale
    if np.any(real_mask & (w.real < 0)):
        # Covers both odd and even multiplicities: even-multiplicity negative
        # eigenvalues do admit non-principal real logs, but never arise from
        # the data handled here and are rejected for determinism.
        raise NoRealLog("negative real eigenvalue")

    pairs = _pair_conjugates(w, tol)
    vinv = np.linalg.inv(v)
    base_log = np.log(np.abs(w)) + 1j * np.angle(w)
    base_log[real_mask] = np.log(w[real_mask].real) + 0j

    fro = np.linalg.norm(a)
    out: list[tuple[tuple[int, ...], np.ndarray]] = []
    windings_iter = itertools.product(range(-max_winding, max_winding + 1), repeat=len(pairs))
    for ks in windings_iter:
        logw = base_log.copy()
        for (i, j), k in zip(pairs, ks):
            logw[i] += 2j * np.pi * k
            logw[j] -= 2j * np.pi * k
        L = (v * logw) @ vinv
        L = np.real(L)
        if np.linalg.norm(expm(L) - a) > LOG_VERIFY_RTOL * fro:
            raise NonConvergence("log branch failed the exponential check")
        out.append((ks, L))
    # principal branch first, then by winding tuple
    out.sort(key=lambda t: (max(abs(k) for k in t[0]) if t[0] else 0, t[0]))
    return out


def real_log_branches(m, max_winding: int = 0, tol: float = SPECTRUM_TOL) -> list[np.ndarray]:
    """Real matrix logarithms of ``m``, principal branch first.

    For all-positive-real spectra the list has exactly one element; each
    complex-conjugate pair contributes one branch per winding number in
    [-max_winding, max_winding].
    """
    return [L for _, L in real_log_branches_with_windings(m, max_winding, tol)]
