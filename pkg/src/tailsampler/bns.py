"""Sigmoid noise-contrastive losses with extra same-class positives.

For an anchor ``q``, its positive view ``v+``, ``m`` extra same-class anchors
and ``n`` negatives ``v-_j``, the balanced loss averages the NS loss over the
``m + 1`` anchors::

    L = -1/(m+1) sum_{q* in {q} + extras} [ log s(q*.v+/t) + sum_j log s(-q*.v-_j/t) ]

where ``s`` is the logistic function and ``t`` the temperature.  With no
extras it is the plain NS loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._seeding import rng_for
from .errors import ClassTooSmall, ConfigMismatch, DimensionMismatch, NonFiniteLoss, NotNormalized


@dataclass(frozen=True)
class BnsConfig:
    tau: float = 0.3
    m: int = 6
    n: int = 5

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.m < 0 or self.n < 1:
            raise ValueError("need m >= 0 and n >= 1")


@dataclass(frozen=True, eq=False)
class BnsBatch:
    """One anchor with its positives and negatives; also reused for gradients."""

    anchor: np.ndarray
    positive: np.ndarray
    extra_positives: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    negatives: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        q = np.asarray(self.anchor, dtype=float)
        v = np.asarray(self.positive, dtype=float)
        if q.ndim != 1 or v.shape != q.shape:
            raise DimensionMismatch(f"anchor {q.shape} and positive {v.shape} differ")
        d = q.size
        ex = np.asarray(self.extra_positives, dtype=float)
        neg = np.asarray(self.negatives, dtype=float)
        ex = ex.reshape(0, d) if ex.size == 0 else ex
        neg = neg.reshape(0, d) if neg.size == 0 else neg
        for name, arr in (("extra_positives", ex), ("negatives", neg)):
            if arr.ndim != 2 or arr.shape[1] != d:
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected (*, {d})")
        for arr in (q, v, ex, neg):
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch("batch contains non-finite values")
        object.__setattr__(self, "anchor", q)
        object.__setattr__(self, "positive", v)
        object.__setattr__(self, "extra_positives", ex)
        object.__setattr__(self, "negatives", neg)

    @property
    def m(self) -> int:
        return self.extra_positives.shape[0]

    @property
    def n(self) -> int:
        return self.negatives.shape[0]

    @property
    def dim(self) -> int:
        return self.anchor.size

    def anchors(self) -> np.ndarray:
        return np.vstack([self.anchor[None, :], self.extra_positives])

    def scaled(self, c: float) -> "BnsBatch":
        return BnsBatch(self.anchor * c, self.positive * c, self.extra_positives * c, self.negatives * c)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def pair_score(q, v, tau: float, d: int) -> float:
    """Classifier output: ``s(q.v/t)`` for a positive pair (d=1), ``s(-q.v/t)`` otherwise."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != v.shape:
        raise DimensionMismatch(f"{q.shape} vs {v.shape}")
    s = float(q @ v) / tau
    return float(sigmoid(s if d else -s))


def _core(anchors, positive, negatives, tau, grad=False):
    """Loss (and gradients) for stacked batches.

    anchors (B, M, d), positive (B, d), negatives (B, n, d); returns per-batch
    losses of shape (B,) and optionally gradients for each input.
    """
    M = anchors.shape[1]
    pos = np.einsum("bmd,bd->bm", anchors, positive) / tau
    neg = np.einsum("bmd,bnd->bmn", anchors, negatives) / tau
    total = log_sigmoid(pos).sum(axis=1) + log_sigmoid(-neg).sum(axis=(1, 2))
    loss = -total / M
    if not grad:
        return loss
    a = sigmoid(-pos) / (M * tau)  # (B, M)
    b = sigmoid(neg) / (M * tau)  # (B, M, n)
    g_anchor = -a[:, :, None] * positive[:, None, :] + np.einsum("bmn,bnd->bmd", b, negatives)
    g_pos = -np.einsum("bm,bmd->bd", a, anchors)
    g_neg = np.einsum("bmn,bmd->bnd", b, anchors)
    return loss, g_anchor, g_pos, g_neg


def _check(batch: BnsBatch, config: BnsConfig, m: int | None = None) -> None:
    m = config.m if m is None else m
    if batch.m != m or batch.n != config.n:
        raise ConfigMismatch(f"batch has m={batch.m}, n={batch.n}; expected m={m}, n={config.n}")


def ns_loss(batch: BnsBatch, config: BnsConfig) -> float:
    _check(batch, config, m=0)
    return float(_core(batch.anchor[None, None, :], batch.positive[None], batch.negatives[None], config.tau)[0])


def bns_loss(batch: BnsBatch, config: BnsConfig) -> float:
    _check(batch, config)
    return float(_core(batch.anchors()[None], batch.positive[None], batch.negatives[None], config.tau)[0])


def bns_decomposition(batch: BnsBatch, config: BnsConfig) -> tuple[float, float]:
    """Instance-level and class-level log-likelihood sums (before the ``-1/(m+1)``)."""
    _check(batch, config)
    t = config.tau
    inst = log_sigmoid(batch.anchor @ batch.positive / t) + log_sigmoid(-(batch.negatives @ batch.anchor) / t).sum()
    ex = batch.extra_positives
    cls = log_sigmoid(ex @ batch.positive / t).sum() + log_sigmoid(-(ex @ batch.negatives.T) / t).sum()
    return float(inst), float(cls)


def bns_gradient(batch: BnsBatch, config: BnsConfig) -> BnsBatch:
    """Analytic gradient of :func:`bns_loss`, packed in a batch-shaped container."""
    _check(batch, config)
    _, ga, gp, gn = _core(batch.anchors()[None], batch.positive[None], batch.negatives[None], config.tau, grad=True)
    return BnsBatch(ga[0, 0], gp[0], ga[0, 1:], gn[0])


# -- toy training ------------------------------------------------------------

def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.where(norms > 0, norms, 1.0)


def intra_class_distance(embeddings, labels, tol: float = 1e-8) -> float:
    """Mean over classes of the mean pairwise cosine distance within the class.

    Classes with a single member have no pairs and are skipped.
    """
    E = np.asarray(embeddings, dtype=float)
    y = np.asarray(labels)
    if np.any(np.abs(np.linalg.norm(E, axis=1) - 1.0) > tol):
        raise NotNormalized("embeddings must be unit vectors")
    per_class = []
    for c in np.unique(y):
        Z = E[y == c]
        n = Z.shape[0]
        if n < 2:
            continue
        G = Z @ Z.T
        iu = np.triu_indices(n, 1)
        per_class.append(float(np.mean(1.0 - G[iu])))
    return float(np.mean(per_class)) if per_class else 0.0


@dataclass(frozen=True, eq=False)
class ToyTrainingResult:
    embeddings: np.ndarray
    loss: np.ndarray  # one entry per evaluated step, steps + 1 in total
    intra_dist: np.ndarray

    def to_csv(self) -> str:
        rows = ["step,loss,intra_dist"]
        for t, (l, d) in enumerate(zip(self.loss, self.intra_dist)):
            rows.append(f"{t},{float(l)!r},{float(d)!r}")
        return "\n".join(rows) + "\n"


def _form_batches(rng, labels, by_class, others, m, n):
    N = labels.size
    extras = np.empty((N, m), dtype=np.int64)
    negs = np.empty((N, n), dtype=np.int64)
    for i in range(N):
        c = labels[i]
        pool = by_class[c]
        mates = pool[pool != i]
        extras[i] = rng.choice(mates, size=m, replace=False) if m else extras[i]
        pool_neg = others[c]
        negs[i] = rng.choice(pool_neg, size=n, replace=pool_neg.size < n)
    return extras, negs


def train_toy_embeddings(
    data,
    labels,
    config: BnsConfig,
    steps: int = 200,
    lr: float = 0.1,
    seed: int = 42,
    noise: float = 0.05,
) -> ToyTrainingResult:
    """Gradient descent on the BNS loss directly over an embedding table.

    Every item is an anchor at every step.  Its two views are additive-noise
    copies of its current embedding; ``m`` same-class mates and ``n``
    other-class items (second view) are redrawn each step.  Rows are
    re-normalised to unit length after each update.  With ``steps=0`` the
    input is returned unchanged.
    """
    X = np.array(data, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch("data must be (N, d) with one label per row")
    classes = np.unique(y)
    if classes.size < 2:
        raise ClassTooSmall("need at least two classes")
    by_class = {c: np.flatnonzero(y == c) for c in classes}
    for c, idx in by_class.items():
        if idx.size < config.m + 1:
            raise ClassTooSmall(f"class {c} has {idx.size} items, need m + 1 = {config.m + 1}")
    others = {c: np.flatnonzero(y != c) for c in classes}
    rng = rng_for(seed, "bns-toy")
    N, d = X.shape
    m, n, tau = config.m, config.n, config.tau

    E = X
    losses, dists = [], []
    for t in range(steps + 1):
        extras, negs = _form_batches(rng, y, by_class, others, m, n)
        view_q = E + noise * rng.standard_normal((N, d))
        view_v = E + noise * rng.standard_normal((N, d))
        anchors = np.concatenate([view_q[:, None, :], view_q[extras]], axis=1)
        loss, ga, gp, gn = _core(anchors, view_v, view_v[negs], tau, grad=True)
        mean_loss = float(loss.mean())
        if not np.isfinite(mean_loss):
            raise NonFiniteLoss(f"loss became {mean_loss} at step {t}")
        losses.append(mean_loss)
        dists.append(intra_class_distance(_normalize_rows(E), y))
        if t == steps:
            break
        G = np.zeros_like(E)
        G += ga[:, 0, :]
        np.add.at(G, extras.ravel(), ga[:, 1:, :].reshape(-1, d))
        G += gp
        np.add.at(G, negs.ravel(), gn.reshape(-1, d))
        E = _normalize_rows(E - lr * G / N)
    return ToyTrainingResult(E, np.array(losses), np.array(dists))
