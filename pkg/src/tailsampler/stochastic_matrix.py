"""Symmetric stochastic kernel built from correct-class probabilities.

For items with probabilities ``p`` the kernel is::

    S[i, j] = p[i] p[j] / N                    (i != j)
    S[j, j] = 1 - sum_{k != j} p[k] p[j] / N

Rows sum to one, the matrix is symmetric, and its spectrum lies in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import DecompositionFailure, EigenvalueOutOfBound, EmptyInput, ProbabilityOutOfRange

CLAMP_TOL = 1e-8
RANK_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs with eigenvalues in descending order (columns of ``eigenvectors``)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > RANK_TOL))

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    entries: np.ndarray
    source_probs: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectral(self) -> SpectralDecomposition:
        return spectral_decompose(self)


def build_stochastic_matrix(probs) -> StochasticMatrix:
    p = np.array(probs, dtype=float).ravel()
    if p.size == 0:
        raise EmptyInput("need at least one probability")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ProbabilityOutOfRange("probabilities must lie in [0, 1]")
    N = p.size
    S = np.outer(p, p) / N
    # row j off-diagonal mass is p[j] * (sum(p) - p[j]) / N
    off = S.sum(axis=1) - np.diag(S)
    np.fill_diagonal(S, 1.0 - off)
    S = 0.5 * (S + S.T)
    S.flags.writeable = False
    p.flags.writeable = False
    return StochasticMatrix(S, p)


def _entries(S) -> np.ndarray:
    return S.entries if isinstance(S, StochasticMatrix) else np.asarray(S, dtype=float)


def spectral_decompose(S, clamp_tol: float = CLAMP_TOL) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition, eigenvalues clamped into [0, 1].

    Eigenvalues within ``clamp_tol`` outside the unit interval are treated as
    float noise; anything further out raises ``EigenvalueOutOfBound``.
    """
    A = _entries(S)
    try:
        lam, V = scipy.linalg.eigh(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionFailure(str(exc)) from exc
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(V))):
        raise DecompositionFailure("non-finite eigenpairs")
    lo, hi = lam.min(), lam.max()
    if lo < -clamp_tol or hi > 1.0 + clamp_tol:
        raise EigenvalueOutOfBound(f"eigenvalues span [{lo!r}, {hi!r}], outside [0, 1]")
    lam = np.clip(lam[::-1], 0.0, 1.0)
    V = np.ascontiguousarray(V[:, ::-1])
    lam.flags.writeable = False
    V.flags.writeable = False
    return SpectralDecomposition(lam, V)


@dataclass(frozen=True)
class LemmaReport:
    symmetric: bool
    row_sums_ok: bool
    psd: bool
    eigs_in_unit: bool
    min_eig: float
    max_eig: float

    @property
    def ok(self) -> bool:
        return self.symmetric and self.row_sums_ok and self.psd and self.eigs_in_unit

    def as_dict(self) -> dict:
        return {
            "symmetric": self.symmetric,
            "row_sums_ok": self.row_sums_ok,
            "psd": self.psd,
            "eigs_in_unit": self.eigs_in_unit,
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
        }


def validate_lemmas(S, tol: float = CLAMP_TOL, row_tol: float = 1e-12) -> LemmaReport:
    """Check symmetry, unit row sums, PSD-ness and eigenvalues <= 1 numerically."""
    A = _entries(S)
    symmetric = bool(np.array_equal(A, A.T))
    row_sums_ok = bool(np.all(np.abs(A.sum(axis=1) - 1.0) <= row_tol)) and bool(np.all(A >= 0))
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))
    lo, hi = float(lam[0]), float(lam[-1])
    return LemmaReport(symmetric, row_sums_ok, lo >= -tol, hi <= 1.0 + tol, lo, hi)
