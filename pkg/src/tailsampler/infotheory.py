"""Exact information measures over finite alphabets (natural log, nats)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotNormalized, OutOfRange

NORM_TOL = 1e-12


def _xlogx(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def _check_pmf(p: np.ndarray, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise NotNormalized(f"{what} must be finite and non-negative")
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise NotNormalized(f"{what} sums to {total!r}, not 1")
    return p


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Joint pmf of two discrete variables with cached marginals."""

    pmf: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    @classmethod
    def from_pmf(cls, pmf) -> "DiscreteJoint":
        pmf = _check_pmf(np.atleast_2d(np.array(pmf, dtype=float)), "joint pmf")
        if pmf.ndim != 2:
            raise NotNormalized("joint pmf must be a matrix")
        pmf.flags.writeable = False
        rows = pmf.sum(axis=1)
        cols = pmf.sum(axis=0)
        rows.flags.writeable = False
        cols.flags.writeable = False
        return cls(pmf, rows, cols)

    @classmethod
    def independent(cls, px, py) -> "DiscreteJoint":
        return cls.from_pmf(np.outer(px, py))

    def transpose(self) -> "DiscreteJoint":
        return DiscreteJoint.from_pmf(self.pmf.T.copy())


def _as_joint(joint) -> DiscreteJoint:
    return joint if isinstance(joint, DiscreteJoint) else DiscreteJoint.from_pmf(joint)


def entropy(pmf) -> float:
    """Shannon entropy ``-sum p log p`` with ``0 log 0 = 0``."""
    p = _check_pmf(pmf, "pmf")
    return float(-_xlogx(p).sum())


def joint_entropy(joint) -> float:
    return entropy(_as_joint(joint).pmf.ravel())


def mutual_information(joint) -> float:
    j = _as_joint(joint)
    p = j.pmf
    outer = np.outer(j.row_marginal, j.col_marginal)
    nz = p > 0
    return float(np.sum(p[nz] * (np.log(p[nz]) - np.log(outer[nz]))))


def information_content(p: float) -> float:
    """Self-information ``-log p`` of an outcome with probability ``p``."""
    p = float(p)
    if not (1e-12 <= p <= 1.0):
        raise OutOfRange(f"probability {p!r} outside [1e-12, 1]")
    return -math.log(p)


def variation_of_information(joint) -> float:
    """``H(X) + H(Y) - 2 MI(X, Y)``."""
    j = _as_joint(joint)
    return entropy(j.row_marginal) + entropy(j.col_marginal) - 2.0 * mutual_information(j)


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    holds: bool

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def nce_bound_check(joint, n: int, tol: float = 1e-10) -> BoundReport:
    """Compare MI against the noise-contrastive lower bound with ``n`` negatives.

    The bound is ``E_{p(q,v)} log[p(q,v) / (p(q,v) + n p(q) p(v))] + log n``,
    enumerated over every cell of the joint.  Negatives are drawn from the
    column marginal.
    """
    if int(n) < 1:
        raise ValueError("n must be a positive integer")
    j = _as_joint(joint)
    p = j.pmf
    noise = n * np.outer(j.row_marginal, j.col_marginal)
    nz = p > 0
    rhs = float(np.sum(p[nz] * (np.log(p[nz]) - np.log(p[nz] + noise[nz])))) + math.log(n)
    lhs = mutual_information(j)
    return BoundReport(lhs, rhs, lhs >= rhs - tol)


def random_joint(rng: np.random.Generator, rows: int, cols: int, *, sparsity: float = 0.0) -> DiscreteJoint:
    """Dirichlet-ish random joint; ``sparsity`` zeroes a fraction of cells."""
    w = rng.exponential(size=(rows, cols))
    if sparsity > 0:
        w[rng.random((rows, cols)) < sparsity] = 0.0
        if w.sum() == 0:
            w[0, 0] = 1.0
    w = w / w.sum()
    # renormalise once more so float error stays far below NORM_TOL
    return DiscreteJoint.from_pmf(w / w.sum())
