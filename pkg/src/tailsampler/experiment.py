"""Desk-scale two-stage long-tail experiment on Gaussian mixtures.

Pipeline per seed:

1. draw a long-tailed training set (``N_c = N_1 * IF^{-c/(C-1)}``) and a
   balanced test set;
2. fit a softmax classifier on all training data (the shared warm start);
3. continue training for ``stage2_epochs`` under each method:

   * ``full-data``: on every training item;
   * ``random-undersample``: on ``min(k, N_c)`` uniformly drawn items per class;
   * ``ip-dpp``: on ``min(k, N_c)`` items per class chosen by the
     fixed-cardinality DPP over the current classifier's probabilities.

   Both subset methods redraw their subset every ``resample_every`` epochs.
4. report many/medium/few-shot and overall test accuracy.

Raw features stand in for stage-1 embeddings.  Passing ``pretrain`` first
learns BNS embeddings for the training items and carries the test items over
with a least-squares affine map from raw features to those embeddings.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .bns import BnsConfig, train_toy_embeddings
from .data_model import ClassManifest, ItemRecord, Variant, clip_probability
from .errors import DegenerateConfig, DimensionMismatch, NonFiniteLoss
from .ipdpp import SamplerConfig, balanced_resample, selected_indices

IP_DPP = "ip-dpp"
RANDOM = "random-undersample"
FULL = "full-data"
METHODS = (IP_DPP, RANDOM, FULL)


@dataclass(frozen=True)
class SyntheticConfig:
    num_classes: int = 10
    max_class_size: int = 500
    imbalance_factor: float = 100.0
    dim: int = 10
    class_separation: float = 3.0
    noise_sigma: float = 1.0
    seed: int = 42
    test_per_class: int = 100

    def class_sizes(self) -> list[int]:
        C, N1, IF = self.num_classes, self.max_class_size, self.imbalance_factor
        if C < 3:
            raise DegenerateConfig(f"need at least 3 classes, got {C}")
        if N1 < C:
            raise DegenerateConfig(f"max class size {N1} is smaller than the class count {C}")
        if not IF >= 1:
            raise DegenerateConfig(f"imbalance factor must be >= 1, got {IF}")
        sizes = [int(np.floor(N1 * IF ** (-c / (C - 1)) + 0.5)) for c in range(C)]
        if min(sizes) < 1:
            raise DegenerateConfig(f"profile yields an empty class: {sizes}")
        return sizes

    def validate(self) -> None:
        self.class_sizes()
        if self.dim < 1 or self.test_per_class < 1 or not self.noise_sigma > 0:
            raise DegenerateConfig("dim, test_per_class and noise_sigma must be positive")


def class_means(config: SyntheticConfig) -> np.ndarray:
    """Class centres with pairwise spacing ``class_separation``.

    Scaled basis vectors when ``dim >= C``; otherwise random unit directions
    (spacing is then only approximate).
    """
    C, d = config.num_classes, config.dim
    scale = config.class_separation / np.sqrt(2.0)
    if d >= C:
        return scale * np.eye(C, d)
    rng = rng_for(config.seed, "means")
    U = rng.standard_normal((C, d))
    return scale * U / np.linalg.norm(U, axis=1, keepdims=True)


def _manifest(X: np.ndarray, y: np.ndarray, prefix: str, C: int) -> ClassManifest:
    items = [ItemRecord(f"{prefix}{i}", int(c), None, tuple(float(v) for v in x)) for i, (x, c) in enumerate(zip(X, y))]
    return ClassManifest.from_items(items, C)


def generate_arrays(config: SyntheticConfig):
    config.validate()
    sizes = config.class_sizes()
    mu = class_means(config)
    rng = rng_for(config.seed, "synthetic")
    y_tr = np.repeat(np.arange(config.num_classes), sizes)
    X_tr = mu[y_tr] + config.noise_sigma * rng.standard_normal((y_tr.size, config.dim))
    y_te = np.repeat(np.arange(config.num_classes), config.test_per_class)
    X_te = mu[y_te] + config.noise_sigma * rng.standard_normal((y_te.size, config.dim))
    return X_tr, y_tr, X_te, y_te


def generate_synthetic(config: SyntheticConfig) -> tuple[ClassManifest, ClassManifest]:
    X_tr, y_tr, X_te, y_te = generate_arrays(config)
    C = config.num_classes
    return _manifest(X_tr, y_tr, "train", C), _manifest(X_te, y_te, "test", C)


# -- softmax classifier ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ToyClassifier:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def logits(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.weights.shape[1]:
            raise DimensionMismatch(f"features {X.shape} vs weights {self.weights.shape}")
        return X @ self.weights.T + self.bias

    def predict_proba(self, X) -> np.ndarray:
        z = self.logits(X)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> "ToyClassifier":
        return cls(np.zeros((num_classes, dim)), np.zeros(num_classes))


def softmax_loss_and_grad(W, b, X, y):
    """Mean cross-entropy and its gradient w.r.t. ``W`` and ``b``."""
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(z).sum(axis=1))
    n = X.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(logZ - z[rows, y]))
    P = np.exp(z - logZ[:, None])
    P[rows, y] -= 1.0
    P /= n
    return loss, P.T @ X, P.sum(axis=0)


def fit_softmax(X, y, num_classes: int, epochs: int, lr: float, seed: int = 42, init: ToyClassifier | None = None):
    """Full-batch gradient descent; returns the model and per-epoch losses."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if init is None:
        rng = rng_for(seed, "softmax-init")
        W = 0.01 * rng.standard_normal((num_classes, X.shape[1]))
        b = np.zeros(num_classes)
    else:
        W, b = init.weights.copy(), init.bias.copy()
    trace = []
    for _ in range(epochs):
        loss, gW, gb = softmax_loss_and_grad(W, b, X, y)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"cross-entropy became {loss}")
        trace.append(loss)
        W -= lr * gW
        b -= lr * gb
    return ToyClassifier(W, b), np.array(trace)


def train_softmax(data: ClassManifest, epochs: int, lr: float, seed: int = 42, init: ToyClassifier | None = None) -> ToyClassifier:
    X = data.features
    if X is None:
        raise DimensionMismatch("manifest items need feature vectors")
    if len(data.class_counts) < 2:
        raise DegenerateConfig("need at least two classes")
    model, _ = fit_softmax(X, data.labels, data.num_classes, epochs, lr, seed, init)
    return model


def true_class_probabilities(model: ToyClassifier, X, y) -> np.ndarray:
    P = model.predict_proba(X)
    return np.clip(P[np.arange(len(y)), y], 1e-12, 1.0)


def annotate_probabilities(model: ToyClassifier, manifest: ClassManifest) -> ClassManifest:
    """Set every item's probability to the model's probability of its own label."""
    X = manifest.features
    if X is None:
        raise DimensionMismatch("manifest items need feature vectors")
    p = true_class_probabilities(model, X, manifest.labels)
    items = [it.with_probability(clip_probability(pi)) for it, pi in zip(manifest.items, p)]
    return ClassManifest.from_items(items, manifest.num_classes)


# -- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class ShotMetrics:
    many: float | None
    medium: float | None
    few: float | None
    overall: float


def synthetic_thresholds(max_class_size: int) -> tuple[float, float]:
    return 0.5 * max_class_size, 0.1 * max_class_size


def shot_metrics(per_class_correct, per_class_total, class_train_counts, thresholds=(500, 200)) -> ShotMetrics:
    """Pooled accuracy per frequency bucket.

    A class is *many*-shot when its training count exceeds ``many_min``,
    *few*-shot when below ``few_max``, *medium* otherwise.  Empty buckets are
    reported as ``None``.
    """
    correct = np.asarray(per_class_correct, dtype=float)
    total = np.asarray(per_class_total, dtype=float)
    counts = np.asarray(class_train_counts, dtype=float)
    if not correct.shape == total.shape == counts.shape:
        raise ValueError("per-class arrays must align")
    many_min, few_max = thresholds
    buckets = {
        "many": counts > many_min,
        "few": counts < few_max,
    }
    buckets["medium"] = ~(buckets["many"] | buckets["few"])

    def pooled(mask):
        t = total[mask].sum()
        return None if not mask.any() or t == 0 else float(correct[mask].sum() / t)

    return ShotMetrics(pooled(buckets["many"]), pooled(buckets["medium"]), pooled(buckets["few"]), float(correct.sum() / total.sum()))


# -- the two-stage run -------------------------------------------------------

@dataclass(frozen=True)
class MethodRun:
    seed: int
    method: str
    many: float | None
    medium: float | None
    few: float | None
    overall: float
    evaluated: int
    subset_sizes: list[int]
    per_class_correct: list[int]
    per_class_total: list[int]


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    sampler: dict
    runs: list[MethodRun] = field(default_factory=list)

    @property
    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.runs})

    def select(self, method: str) -> list[MethodRun]:
        return sorted((r for r in self.runs if r.method == method), key=lambda r: r.seed)

    def mean(self, method: str, metric: str) -> float | None:
        vals = [getattr(r, metric) for r in self.select(method)]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    def to_json(self) -> str:
        methods = [m for m in METHODS if self.select(m)]
        doc = {
            "config": self.config,
            "sampler": self.sampler,
            "seeds": self.seeds,
            "summary": {m: {k: self.mean(m, k) for k in ("many", "medium", "few", "overall")} for m in methods},
            "runs": [asdict(r) for r in self.runs],
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        def f(v):
            return "" if v is None else repr(v)

        rows = ["seed,method,many,medium,few,overall"]
        for r in self.runs:
            rows.append(f"{r.seed},{r.method},{f(r.many)},{f(r.medium)},{f(r.few)},{f(r.overall)}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class TrainingSchedule:
    warmup_epochs: int = 200
    stage2_epochs: int = 50
    lr: float = 0.5


def pretrain_features(X, y, X_test, config: BnsConfig, steps: int = 200, lr: float = 0.1, seed: int = 42):
    """BNS embeddings for ``X`` and their affine extension to ``X_test``."""
    res = train_toy_embeddings(X, y, config, steps=steps, lr=lr, seed=seed)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    M, *_ = np.linalg.lstsq(A, res.embeddings, rcond=None)
    return res.embeddings, np.hstack([X_test, np.ones((X_test.shape[0], 1))]) @ M


def _random_subset(rng, y, k):
    out = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        out.extend(idx if idx.size <= k else rng.choice(idx, size=k, replace=False))
    return np.sort(np.asarray(out, dtype=np.int64))


def _ipdpp_subset(model, X, y, C, sampler: SamplerConfig):
    p = true_class_probabilities(model, X, y)
    items = [ItemRecord(str(i), int(c), float(pi)) for i, (c, pi) in enumerate(zip(y, p))]
    manifest = ClassManifest.from_items(items, C)
    return np.asarray(selected_indices(balanced_resample(manifest, sampler)), dtype=np.int64)


def _run_seed(config, sampler, schedule, resample_every, methods, thresholds, pretrain=None):
    X, y, X_te, y_te = generate_arrays(config)
    if pretrain is not None:
        X, X_te = pretrain_features(X, y, X_te, pretrain, seed=derive_seed(config.seed, "pretrain"))
    C = config.num_classes
    counts = np.bincount(y, minlength=C)
    warm, _ = fit_softmax(X, y, C, schedule.warmup_epochs, schedule.lr, config.seed)
    rounds = max(1, -(-schedule.stage2_epochs // resample_every))
    runs = []
    for method in methods:
        model = warm
        sizes = counts.tolist()
        if method == FULL:
            model, _ = fit_softmax(X, y, C, schedule.stage2_epochs, schedule.lr, init=model)
        else:
            left = schedule.stage2_epochs
            for r in range(rounds):
                if method == RANDOM:
                    idx = _random_subset(rng_for(config.seed, "random-undersample", r), y, sampler.k)
                else:
                    round_cfg = replace(sampler, seed=derive_seed(sampler.seed, config.seed, "ip-dpp", r))
                    idx = _ipdpp_subset(model, X, y, C, round_cfg)
                sizes = np.bincount(y[idx], minlength=C).tolist()
                ep = min(resample_every, left)
                model, _ = fit_softmax(X[idx], y[idx], C, ep, schedule.lr, init=model)
                left -= ep
        pred = model.predict(X_te)
        correct = np.bincount(y_te[pred == y_te], minlength=C)
        total = np.bincount(y_te, minlength=C)
        m = shot_metrics(correct, total, counts, thresholds)
        runs.append(
            MethodRun(config.seed, method, m.many, m.medium, m.few, m.overall, int(total.sum()), sizes, correct.tolist(), total.tolist())
        )
    return runs


def run_two_stage(
    config: SyntheticConfig,
    sampler: SamplerConfig | None = None,
    resample_every: int = 10,
    methods: Sequence[str] = METHODS,
    seeds: Sequence[int] | None = None,
    schedule: TrainingSchedule | None = None,
    thresholds: tuple[float, float] | None = None,
    pretrain: BnsConfig | None = None,
) -> ExperimentReport:
    """Run every method on every seed; ``seeds`` defaults to ``[config.seed]``.

    ``sampler.k`` defaults to ten times the smallest class.  Each seed
    regenerates the data with that seed.  ``pretrain`` routes the features
    through BNS toy training first (off by default).
    """
    config.validate()
    if resample_every < 1:
        raise DegenerateConfig("resample_every must be >= 1")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise DegenerateConfig(f"unknown methods {sorted(unknown)}")
    if sampler is None:
        sampler = SamplerConfig(k=10 * min(config.class_sizes()))
    schedule = schedule or TrainingSchedule()
    thresholds = thresholds or synthetic_thresholds(config.max_class_size)
    seeds = [config.seed] if seeds is None else list(seeds)
    ordered = [m for m in METHODS if m in set(methods)]
    runs = []
    for s in seeds:
        runs.extend(_run_seed(replace(config, seed=int(s)), sampler, schedule, resample_every, ordered, thresholds, pretrain))
    sampler_doc = {"k": sampler.k, "seed": sampler.seed, "variant": sampler.variant.value, "topup": sampler.topup}
    config_doc = asdict(config)
    config_doc.update(resample_every=resample_every, schedule=asdict(schedule), thresholds=list(thresholds))
    config_doc["pretrain"] = None if pretrain is None else asdict(pretrain)
    return ExperimentReport(config_doc, sampler_doc, runs)
