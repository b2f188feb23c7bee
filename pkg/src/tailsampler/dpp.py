"""L-ensemble DPP over a symmetric stochastic kernel.

Subset probabilities are ``det(S_Y) / det(S + I)``.  This module provides the
exact quantities (principal minors, full enumeration for small ground sets,
the marginal kernel ``K = S (S + I)^{-1}``) and the two-phase spectral
sampler:

1. keep eigenvector ``v_i`` independently with probability ``l_i / (l_i + 1)``;
2. repeatedly pick an item ``i`` from ``p(i) = |V|^{-1} sum_v v_i^2`` and
   restrict the span of ``V`` to vectors vanishing at ``i``.

Step 2 comes in two flavours.  ``PAPER_ARGMAX`` takes ``argmax_i p(i)`` (ties
go to the lowest index) which makes the item phase deterministic once the
eigenvectors are fixed.  ``PROBABILISTIC`` draws ``i ~ p(i)``, which is the
exact DPP sampler and reproduces the marginals ``diag(K)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg

from ._seeding import rng_for
from .data_model import DppSample, Variant
from .errors import (
    DecompositionFailure,
    GroundSetTooLarge,
    IndexOutOfRange,
    OrthogonalizationCollapse,
    SingularPartition,
)
from .stochastic_matrix import SpectralDecomposition, StochasticMatrix, spectral_decompose

MAX_ENUM = 20
DET_FLOOR = 1e-300
COLLAPSE_TOL = 1e-10
TIE_TOL = 1e-12


def _entries(S) -> np.ndarray:
    return S.entries if isinstance(S, StochasticMatrix) else np.asarray(S, dtype=float)


def _spectrum(S) -> SpectralDecomposition:
    if isinstance(S, StochasticMatrix):
        return S.spectral
    if isinstance(S, SpectralDecomposition):
        return S
    return spectral_decompose(S)


# -- determinants ------------------------------------------------------------

def symmetric_dets(blocks: np.ndarray) -> np.ndarray:
    """Determinants of a stack of symmetric matrices via LDL^T pivot products.

    ``blocks`` has shape ``(M, s, s)``.  Elimination runs without pivoting,
    which is safe for PSD input: a zero pivot there forces a zero
    determinant.  Members that hit an exactly-zero pivot fall back to LU so
    indefinite input is still handled correctly.  Magnitudes below 1e-300 are
    reported as 0.
    """
    B = np.array(blocks, dtype=float, copy=True)
    if B.ndim != 3 or B.shape[1] != B.shape[2]:
        raise ValueError("expected a stack of square matrices")
    M, s, _ = B.shape
    det = np.ones(M)
    stalled = np.zeros(M, dtype=bool)
    for j in range(s):
        piv = B[:, j, j].copy()
        zero = np.abs(piv) <= DET_FLOOR
        stalled |= zero
        piv[zero] = 1.0
        det *= piv
        if j + 1 < s:
            col = B[:, j + 1:, j]
            B[:, j + 1:, j + 1:] -= col[:, :, None] * col[:, None, :] / piv[:, None, None]
    if stalled.any():
        det[stalled] = np.linalg.det(np.asarray(blocks, dtype=float)[stalled])
    det[np.abs(det) < DET_FLOOR] = 0.0
    return det


def principal_minor(S, subset: Sequence[int]) -> float:
    A = _entries(S)
    idx = _check_subset(subset, A.shape[0])
    if idx.size == 0:
        return 1.0
    return float(symmetric_dets(A[np.ix_(idx, idx)][None])[0])


def log_partition(S) -> float:
    """``log det(S + I)``."""
    A = _entries(S)
    sign, logdet = np.linalg.slogdet(A + np.eye(A.shape[0]))
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularPartition("det(S + I) is not positive")
    return float(logdet)


def partition(S) -> float:
    return float(np.exp(log_partition(S)))


def _check_subset(subset, n: int) -> np.ndarray:
    idx = np.array(sorted(set(int(i) for i in subset)), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise IndexOutOfRange(f"subset {idx.tolist()} outside [0, {n})")
    return idx


def subset_probability(S, subset: Sequence[int]) -> float:
    """``P(Y) = det(S_Y) / det(S + I)`` with ``det(S_empty) = 1``."""
    A = _entries(S)
    idx = _check_subset(subset, A.shape[0])
    minor = 1.0 if idx.size == 0 else float(symmetric_dets(A[np.ix_(idx, idx)][None])[0])
    return minor / partition(A)


# -- exhaustive enumeration --------------------------------------------------

def _bitmask(idx) -> int:
    m = 0
    for i in idx:
        m |= 1 << int(i)
    return m


def minors_of_size(A: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """All ``C(N, size)`` subsets (rows of an index array) and their minors."""
    N = A.shape[0]
    if size == 0:
        return np.zeros((1, 0), dtype=np.int64), np.ones(1)
    combos = np.array(list(itertools.combinations(range(N), size)), dtype=np.int64)
    blocks = A[combos[:, :, None], combos[:, None, :]]
    return combos, symmetric_dets(blocks)


@dataclass(frozen=True)
class EnumerationTable:
    """Every subset of a small ground set with its probability.

    ``subset_probs`` maps a bitmask (bit ``i`` set when item ``i`` is in the
    subset) to ``det(S_Y) / det(S + I)``.
    """

    n: int
    subset_probs: dict[int, float]
    minor_sum: float
    partition: float

    @property
    def normalization_error(self) -> float:
        return abs(self.minor_sum - self.partition) / self.partition

    def marginals(self) -> np.ndarray:
        out = np.zeros(self.n)
        for mask, p in self.subset_probs.items():
            for i in range(self.n):
                if mask >> i & 1:
                    out[i] += p
        return out

    def size_distribution(self) -> np.ndarray:
        out = np.zeros(self.n + 1)
        for mask, p in self.subset_probs.items():
            out[bin(mask).count("1")] += p
        return out


def enumerate_all(S) -> EnumerationTable:
    A = _entries(S)
    N = A.shape[0]
    if N > MAX_ENUM:
        raise GroundSetTooLarge(f"N={N} exceeds enumeration bound {MAX_ENUM}")
    Z = partition(A)
    probs: dict[int, float] = {}
    total = 0.0
    for size in range(N + 1):
        combos, dets = minors_of_size(A, size)
        total += float(dets.sum())
        for row, d in zip(combos, dets):
            probs[_bitmask(row)] = float(d) / Z
    return EnumerationTable(N, probs, total, Z)


# -- marginal kernel ---------------------------------------------------------

def marginal_kernel(S) -> np.ndarray:
    """``K = S (S + I)^{-1}``; ``diag(K)`` are the inclusion probabilities."""
    A = _entries(S)
    try:
        K = scipy.linalg.solve(A + np.eye(A.shape[0]), A, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionFailure(str(exc)) from exc
    # S and (S + I)^{-1} commute, so K is symmetric up to rounding
    return 0.5 * (K + K.T)


def expected_size(S) -> float:
    """``E|Y| = sum_i l_i / (l_i + 1) = trace(K)``."""
    lam = _spectrum(S).eigenvalues
    return float(np.sum(lam / (lam + 1.0)))


def size_variance(S) -> float:
    """Variance of ``|Y|``: a Poisson-binomial over the eigenvector coins."""
    lam = _spectrum(S).eigenvalues
    q = lam / (lam + 1.0)
    return float(np.sum(q * (1.0 - q)))


# -- sampling ----------------------------------------------------------------

def select_eigenvectors(eigenvalues: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Eigenvector phase: keep ``i`` when ``u[i] < l_i / (l_i + 1)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    return np.flatnonzero(np.asarray(u) < lam / (lam + 1.0))


def _argmax_lowest(w: np.ndarray) -> int:
    return int(np.flatnonzero(w >= w.max() - TIE_TOL)[0])


def select_items(V: np.ndarray, variant: Variant = Variant.PAPER_ARGMAX, rng: np.random.Generator | None = None) -> list[int]:
    """Item phase over the orthonormal columns of ``V``.

    After each pick ``i`` the basis is rotated by a Householder reflector that
    maps the row ``V[i]`` onto the first coordinate; dropping that column
    leaves an orthonormal basis of the subspace vanishing at ``i``.
    """
    V = np.array(V, dtype=float, copy=True)
    if V.ndim != 2:
        raise ValueError("V must be an N x k matrix")
    variant = Variant(variant)
    if variant is Variant.PROBABILISTIC and rng is None:
        raise ValueError("the probabilistic variant needs a random generator")
    chosen: list[int] = []
    while V.shape[1] > 0:
        k = V.shape[1]
        w = np.einsum("ij,ij->i", V, V) / k
        if variant is Variant.PAPER_ARGMAX:
            i = _argmax_lowest(w)
        else:
            w = np.clip(w, 0.0, None)
            if chosen:
                w[chosen] = 0.0
            cdf = np.cumsum(w)
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            i = min(i, V.shape[0] - 1)
        r = V[i].copy()
        nr = float(np.linalg.norm(r))
        if nr < COLLAPSE_TOL:
            raise OrthogonalizationCollapse(
                f"item {i} has weight {nr:.3e} in the remaining span after {len(chosen)} picks"
            )
        chosen.append(i)
        if k == 1:
            break
        h = r / nr
        h[0] += 1.0 if h[0] >= 0 else -1.0
        V = V - np.outer(V @ h, h) * (2.0 / (h @ h))
        V = V[:, 1:]
        V[i] = 0.0
    return chosen


def _draw(spec: SpectralDecomposition, rng: np.random.Generator, variant: Variant) -> list[int]:
    u = rng.random(spec.eigenvalues.size)
    keep = select_eigenvectors(spec.eigenvalues, u)
    return select_items(spec.eigenvectors[:, keep], variant, rng)


def sample_standard(S, seed: int, variant: Variant = Variant.PAPER_ARGMAX) -> DppSample:
    """One draw from the spectral DPP sampler (no cardinality constraint)."""
    variant = Variant(variant)
    if variant is Variant.EXACT_KDPP_ORACLE:
        raise ValueError("the exact k-DPP oracle lives in tailsampler.ipdpp")
    items = _draw(_spectrum(S), rng_for(seed), variant)
    return DppSample(frozenset(items), int(seed), variant)


def iter_samples(S, seed: int, count: int, variant: Variant = Variant.PROBABILISTIC) -> Iterator[list[int]]:
    """``count`` independent draws sharing one random stream (for Monte Carlo)."""
    spec = _spectrum(S)
    variant = Variant(variant)
    rng = rng_for(seed, "iter_samples")
    for _ in range(count):
        yield _draw(spec, rng, variant)


@dataclass(frozen=True)
class MarginalReport:
    empirical: np.ndarray
    kernel: np.ndarray
    z_scores: np.ndarray
    draws: int
    mean_size: float

    def fraction_within(self, z: float = 3.0) -> float:
        return float(np.mean(np.abs(self.z_scores) <= z))

    def to_csv(self) -> str:
        rows = ["item,empirical_marginal,kernel_marginal,z_score"]
        for i, (e, k, z) in enumerate(zip(self.empirical, self.kernel, self.z_scores)):
            rows.append(f"{i},{float(e)!r},{float(k)!r},{float(z)!r}")
        return "\n".join(rows) + "\n"


def monte_carlo_marginals(S, seed: int, draws: int, variant: Variant = Variant.PROBABILISTIC) -> MarginalReport:
    """Empirical inclusion frequencies against ``diag(K)``, with binomial z-scores."""
    A = _entries(S)
    N = A.shape[0]
    counts = np.zeros(N)
    total = 0
    for items in iter_samples(S, seed, draws, variant):
        counts[items] += 1.0
        total += len(items)
    emp = counts / draws
    kern = np.diag(marginal_kernel(A)).copy()
    se = np.sqrt(np.clip(kern * (1.0 - kern), 1e-300, None) / draws)
    z = (emp - kern) / se
    return MarginalReport(emp, kern, z, draws, total / draws)
