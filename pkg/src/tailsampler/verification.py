"""Randomised property suites behind ``tailsampler verify``.

Each suite returns a list of :class:`Check` rows.  A failing check carries
the seed and parameters of the first failing instance so it can be replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed, rng_for
from .bns import BnsBatch, BnsConfig, bns_decomposition, bns_gradient, bns_loss, ns_loss
from .dpp import enumerate_all, monte_carlo_marginals
from .experiment import softmax_loss_and_grad
from .infotheory import (
    entropy,
    joint_entropy,
    mutual_information,
    nce_bound_check,
    random_joint,
    variation_of_information,
)
from .stochastic_matrix import build_stochastic_matrix, spectral_decompose, validate_lemmas

SUITES = ("matrix", "dpp", "bns", "info")

FD_STEP = 1e-5
FD_RTOL = 1e-5
FD_FLOOR = 1e-3


@dataclass
class Check:
    name: str
    trials: int = 0
    failures: int = 0
    worst: float = 0.0
    replay: dict | None = None
    rows: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, value: float = 0.0, **replay) -> None:
        self.trials += 1
        if math.isfinite(value):
            self.worst = max(self.worst, value)
        if not ok:
            self.failures += 1
            if self.replay is None:
                self.replay = replay


def fd_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = FD_FLOOR) -> float:
    """Largest componentwise ``|a - f| / max(|a|, |f|, floor)``."""
    a = np.asarray(analytic, dtype=float).ravel()
    f = np.asarray(numeric, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)))


def central_difference(fn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=float, copy=True)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = fn(x)
        flat[i] = old - h
        down = fn(x)
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


# -- matrix ------------------------------------------------------------------

def matrix_suite(trials: int, seed: int, inject_fault: bool = False) -> list[Check]:
    lemmas = Check("kernel is symmetric, stochastic, psd, eigenvalues in [0,1]")
    recon = Check("spectral reconstruction <= 1e-8")
    trace = Check("trace identity <= 1e-10")
    for t in range(trials):
        s = derive_seed(seed, "matrix", t)
        rng = rng_for(s)
        N = int(rng.integers(2, 65))
        p = rng.random(N)
        S = build_stochastic_matrix(p).entries
        if inject_fault:
            S = S.copy()
            S[0, 1] += 0.75
            S[1, 0] += 0.75
        rep = validate_lemmas(S)
        lemmas.record(rep.ok, max(-rep.min_eig, rep.max_eig - 1.0, 0.0), seed=s, N=N)
        if not rep.ok:
            continue
        sd = spectral_decompose(S)
        recon.record(bool(np.max(np.abs(sd.reconstruct() - S)) <= 1e-8), float(np.max(np.abs(sd.reconstruct() - S))), seed=s, N=N)
        err = abs(np.trace(S) - sd.eigenvalues.sum())
        trace.record(err <= 1e-10, err, seed=s, N=N)
    return [lemmas, recon, trace]


# -- dpp ---------------------------------------------------------------------

def dpp_suite(trials: int, seed: int) -> list[Check]:
    norm = Check("normalization sum det(S_Y) = det(S+I), rel <= 1e-8")
    bounded = Check("bounded probability 0 <= P(Y) <= 1")
    fidelity = Check("marginal fidelity, >= 95% of items within 3 s.e.")
    for t in range(trials):
        s = derive_seed(seed, "dpp", t)
        rng = rng_for(s)
        N = int(rng.integers(2, 13))
        S = build_stochastic_matrix(rng.random(N))
        table = enumerate_all(S)
        norm.record(table.normalization_error <= 1e-8, table.normalization_error, seed=s, N=N)
        vals = np.fromiter(table.subset_probs.values(), float)
        excess = max(float(-vals.min()), float(vals.max() - 1.0), 0.0)
        bounded.record(excess <= 1e-12, excess, seed=s, N=N)
    s = derive_seed(seed, "dpp-mc")
    rng = rng_for(s)
    N = 12
    draws = max(2000, 100 * trials)
    rep = monte_carlo_marginals(build_stochastic_matrix(rng.random(N)), s, draws)
    frac = rep.fraction_within(3.0)
    fidelity.record(frac >= 0.95, 1.0 - frac, seed=s, N=N, draws=draws)
    return [norm, bounded, fidelity]


# -- bns ---------------------------------------------------------------------

def random_batch(rng: np.random.Generator, d: int, m: int, n: int) -> BnsBatch:
    def vecs(k):
        return rng.standard_normal((k, d)) / np.sqrt(d)

    return BnsBatch(vecs(1)[0], vecs(1)[0], vecs(m), vecs(n))


def _bns_fd_error(batch: BnsBatch, cfg: BnsConfig) -> float:
    g = bns_gradient(batch, cfg)
    parts = [batch.anchor, batch.positive, batch.extra_positives, batch.negatives]
    grads = [g.anchor, g.positive, g.extra_positives, g.negatives]
    worst = 0.0
    for slot, (x, ga) in enumerate(zip(parts, grads)):
        if x.size == 0:
            continue

        def f(z, slot=slot):
            p = list(parts)
            p[slot] = z
            return bns_loss(BnsBatch(*p), cfg)

        worst = max(worst, fd_relative_error(ga, central_difference(f, x)))
    return worst


def bns_suite(trials: int, seed: int) -> list[Check]:
    red = Check("m=0 reduces to NS loss (<= 1e-15)")
    dec = Check("instance/class decomposition (<= 1e-12)")
    grad = Check("analytic gradient vs central differences (<= 1e-5 rel)")
    for t in range(trials):
        s = derive_seed(seed, "bns", t)
        rng = rng_for(s)
        d = int(rng.choice([2, 8, 32]))
        n = int(rng.choice([1, 5, 20]))
        m = int(rng.choice([0, 3, 6]))
        tau = float(rng.choice([0.1, 0.3, 1.0]))
        batch = random_batch(rng, d, m, n)
        cfg = BnsConfig(tau, m, n)
        base = BnsBatch(batch.anchor, batch.positive, np.zeros((0, d)), batch.negatives)
        cfg0 = BnsConfig(tau, 0, n)
        diff = abs(bns_loss(base, cfg0) - ns_loss(base, cfg0))
        red.record(diff <= 1e-15, diff, seed=s, d=d, n=n, tau=tau)
        inst, cls = bns_decomposition(batch, cfg)
        diff = abs(bns_loss(batch, cfg) * (m + 1) + inst + cls)
        dec.record(diff <= 1e-12, diff, seed=s, d=d, m=m, n=n, tau=tau)
        err = _bns_fd_error(batch, cfg)
        grad.record(err <= FD_RTOL, err, seed=s, d=d, m=m, n=n, tau=tau)
    return [red, dec, grad]


def softmax_gradient_suite(trials: int, seed: int) -> Check:
    chk = Check("softmax cross-entropy gradient vs central differences (<= 1e-5 rel)")
    for t in range(trials):
        s = derive_seed(seed, "softmax-grad", t)
        rng = rng_for(s)
        C = int(rng.integers(2, 8))
        d = int(rng.integers(1, 9))
        n = int(rng.integers(1, 30))
        X = rng.standard_normal((n, d))
        y = rng.integers(0, C, n)
        W = rng.standard_normal((C, d))
        b = rng.standard_normal(C)
        _, gW, gb = softmax_loss_and_grad(W, b, X, y)
        nW = central_difference(lambda z: softmax_loss_and_grad(z, b, X, y)[0], W)
        nb = central_difference(lambda z: softmax_loss_and_grad(W, z, X, y)[0], b)
        err = max(fd_relative_error(gW, nW), fd_relative_error(gb, nb))
        chk.record(err <= FD_RTOL, err, seed=s, C=C, d=d, n=n)
    return chk


# -- info --------------------------------------------------------------------

def info_suite(trials: int, seed: int) -> list[Check]:
    bound = Check("NCE lower bound MI >= E log g + log n")
    vi = Check("VI identity H(X)+H(Y)-2MI = H(X,Y)-MI (<= 1e-10)")
    sym = Check("MI symmetry and MI <= min(H(X), H(Y))")
    for t in range(trials):
        s = derive_seed(seed, "info", t)
        rng = rng_for(s)
        a, b = (int(v) for v in rng.integers(2, 7, size=2))
        n = int(rng.integers(1, 11))
        j = random_joint(rng, a, b, sparsity=float(rng.choice([0.0, 0.3])))
        rep = nce_bound_check(j, n)
        bound.rows.append((s, a, b, n, rep))
        bound.record(rep.holds, max(rep.rhs - rep.lhs, 0.0), seed=s, shape=(a, b), n=n)
        mi = mutual_information(j)
        err = abs(variation_of_information(j) - (joint_entropy(j) - mi))
        vi.record(err <= 1e-10, err, seed=s, shape=(a, b))
        asym = abs(mi - mutual_information(j.transpose()))
        over = mi - min(entropy(j.row_marginal), entropy(j.col_marginal))
        sym.record(asym <= 1e-12 and over <= 1e-12, max(asym, over), seed=s, shape=(a, b))
    return [bound, vi, sym]


def bound_rows_csv(check: Check) -> str:
    lines = ["seed,rows,cols,n,lhs,rhs,holds"]
    for s, a, b, n, rep in check.rows:
        lines.append(f"{s},{a},{b},{n},{float(rep.lhs)!r},{float(rep.rhs)!r},{str(rep.holds).lower()}")
    return "\n".join(lines) + "\n"


def run_suite(name: str, trials: int, seed: int, inject_fault: bool = False) -> list[Check]:
    if name == "matrix":
        return matrix_suite(trials, seed, inject_fault)
    if name == "dpp":
        return dpp_suite(trials, seed)
    if name == "bns":
        return bns_suite(trials, seed) + [softmax_gradient_suite(trials, seed)]
    if name == "info":
        return info_suite(trials, seed)
    raise ValueError(f"unknown suite {name!r}")
