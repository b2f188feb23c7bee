"""Fixed-cardinality sampling and per-class rebalancing.

``sample_k`` walks the eigenvalues in descending order, keeping eigenvector
``i`` with probability ``l_i / (l_i + 1)`` until ``k`` have been kept, then
runs the item phase of :mod:`tailsampler.dpp`.  The walk can end early with
fewer than ``k`` eigenvectors; with ``topup`` enabled the deficit is filled
with the remaining eigenvectors in descending eigenvalue order.

``exact_kdpp_oracle`` samples the true k-DPP ``P(Y) ~ det(S_Y), |Y| = k`` by
enumeration and exists to measure how far the fast sampler is from it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from math import comb

import numpy as np

from ._seeding import derive_seed, rng_for, thread_cap
from .data_model import ClassManifest, DppSample, Variant
from .dpp import _entries, _spectrum, minors_of_size, select_items
from .errors import DegenerateSupport, EmptyClass, GroundSetTooLarge, KTooLarge, MissingProbability
from .stochastic_matrix import RANK_TOL, build_stochastic_matrix

MAX_ORACLE_N = 12


@dataclass(frozen=True)
class SamplerConfig:
    k: int
    seed: int = 42
    variant: Variant = Variant.PAPER_ARGMAX
    topup: bool = True

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "variant", Variant(self.variant))

    @classmethod
    def for_manifest(cls, manifest: ClassManifest, ratio: int = 10, **kw) -> "SamplerConfig":
        """Default cardinality: ``ratio`` times the smallest non-empty class."""
        smallest = min(n for n in manifest.class_counts.values() if n > 0)
        return cls(k=ratio * smallest, **kw)


def select_k_eigenvectors(eigenvalues: np.ndarray, u: np.ndarray, k: int, topup: bool = True) -> list[int]:
    """Truncated eigenvector walk; ``eigenvalues`` must be sorted descending."""
    lam = np.asarray(eigenvalues, dtype=float)
    q = lam / (lam + 1.0)
    kept: list[int] = []
    for i in range(lam.size):
        if u[i] < q[i]:
            kept.append(i)
            if len(kept) == k:
                break
    if topup:
        target = min(k, int(np.count_nonzero(lam > RANK_TOL)))
        if len(kept) < target:
            have = set(kept)
            for i in np.argsort(-q, kind="stable"):
                if len(kept) == target:
                    break
                if int(i) not in have and lam[i] > RANK_TOL:
                    kept.append(int(i))
    return kept


def sample_k(S, config: SamplerConfig) -> DppSample:
    if config.variant is Variant.EXACT_KDPP_ORACLE:
        return exact_kdpp_oracle(S, config.k, config.seed)
    spec = _spectrum(S)
    N = spec.eigenvalues.size
    if config.k > N:
        raise KTooLarge(f"k={config.k} exceeds ground set size {N}")
    rng = rng_for(config.seed)
    u = rng.random(N)
    kept = select_k_eigenvectors(spec.eigenvalues, u, config.k, config.topup)
    items = select_items(spec.eigenvectors[:, kept], config.variant, rng)
    return DppSample(frozenset(items), config.seed, config.variant)


# -- exact k-DPP -------------------------------------------------------------

@dataclass(frozen=True)
class KdppTable:
    subsets: np.ndarray  # (M, k) index rows
    probs: np.ndarray
    normalizer: float

    def draw(self, rng: np.random.Generator, size: int | None = None):
        return rng.choice(len(self.probs), size=size, p=self.probs)


def kdpp_table(S, k: int) -> KdppTable:
    A = _entries(S)
    N = A.shape[0]
    if N > MAX_ORACLE_N:
        raise GroundSetTooLarge(f"N={N} exceeds oracle bound {MAX_ORACLE_N}")
    if not 0 <= k <= N:
        raise KTooLarge(f"k={k} outside [0, {N}]")
    subsets, dets = minors_of_size(A, k)
    dets = np.clip(dets, 0.0, None)
    Z = float(dets.sum())
    if not Z > 0.0:
        raise DegenerateSupport(f"every size-{k} minor vanishes")
    probs = dets / Z
    return KdppTable(subsets, probs / probs.sum(), Z)


def exact_kdpp_oracle(S, k: int, seed: int) -> DppSample:
    table = kdpp_table(S, k)
    row = table.draw(rng_for(seed))
    return DppSample(frozenset(table.subsets[row].tolist()), int(seed), Variant.EXACT_KDPP_ORACLE)


def kdpp_table_size(n: int, k: int) -> int:
    return comb(n, k)


# -- per-class rebalancing ---------------------------------------------------

def _fill_deficit(chosen: list[int], probs: np.ndarray, target: int) -> list[int]:
    # rank-deficient kernels (many items at p == 1) cannot yield k items;
    # pad with the least confidently classified leftovers
    if len(chosen) >= target:
        return chosen
    have = set(chosen)
    order = np.lexsort((np.arange(probs.size), probs))
    out = list(chosen)
    for i in order:
        if len(out) == target:
            break
        if int(i) not in have:
            out.append(int(i))
    return out


def _resample_class(label: int, idx: np.ndarray, probs: np.ndarray, config: SamplerConfig) -> DppSample:
    seed = derive_seed(config.seed, "class", label)
    if idx.size <= config.k:
        return DppSample(frozenset(idx.tolist()), seed, config.variant)
    S = build_stochastic_matrix(probs)
    local = sample_k(S, replace(config, seed=seed)).sorted()
    if config.topup:
        local = _fill_deficit(local, probs, config.k)
    return DppSample(frozenset(idx[local].tolist()), seed, config.variant)


def balanced_resample(manifest: ClassManifest, config: SamplerConfig) -> dict[int, DppSample]:
    """Draw ``min(k, N_c)`` items from every class.

    Classes no larger than ``k`` are kept whole.  Each class gets its own seed
    derived from ``config.seed`` and its label, so the result does not depend
    on processing order.  Indices in the returned samples refer to the
    manifest.
    """
    probs = manifest.probabilities
    if np.isnan(probs).any():
        missing = manifest.items[int(np.flatnonzero(np.isnan(probs))[0])].id
        raise MissingProbability(f"item {missing!r} has no probability")
    jobs = []
    for c in range(manifest.num_classes):
        idx = manifest.indices_of(c)
        if idx.size == 0:
            raise EmptyClass(f"class {c} has no items")
        jobs.append((c, idx, probs[idx]))

    workers = thread_cap()
    if workers > 0 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _resample_class(*j, config), jobs))
    else:
        results = [_resample_class(*j, config) for j in jobs]
    return {c: r for (c, _, _), r in zip(jobs, results)}


def selected_indices(samples: dict[int, DppSample]) -> list[int]:
    out: list[int] = []
    for c in sorted(samples):
        out.extend(samples[c].indices)
    return sorted(out)
