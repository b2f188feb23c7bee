"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line; the lines are
also collected and repeated in the pytest terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` to get just the table.
"""

import time

import numpy as np
import pytest

from tailsampler.bns import BnsConfig, bns_decomposition, bns_gradient, bns_loss, ns_loss, train_toy_embeddings
from tailsampler.data_model import ClassManifest, ItemRecord, Variant
from tailsampler.dpp import marginal_kernel, minors_of_size, monte_carlo_marginals, sample_standard, subset_probability
from tailsampler.experiment import FULL, IP_DPP, RANDOM, SyntheticConfig, run_two_stage, softmax_loss_and_grad
from tailsampler.infotheory import nce_bound_check, random_joint
from tailsampler.ipdpp import SamplerConfig, balanced_resample, kdpp_table
from tailsampler.stochastic_matrix import SpectralDecomposition, build_stochastic_matrix
from tailsampler.verification import central_difference, fd_relative_error, random_batch
from tailsampler.bns import BnsBatch

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def toy_data(seed, per_class=20, sigma=0.6):
    rng = np.random.default_rng(seed)
    means = np.array([[1.0, 0.3], [-0.3, 1.0]])
    y = np.repeat([0, 1], per_class)
    return means[y] + sigma * rng.standard_normal((y.size, 2)), y


def test_criterion_01_stochastic_matrix_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    bad = 0
    worst_row = worst_lo = worst_hi = 0.0
    for _ in range(1000):
        N = int(rng.integers(2, 65))
        A = build_stochastic_matrix(rng.random(N)).entries
        lam = np.linalg.eigvalsh(A)
        row = float(np.max(np.abs(A.sum(axis=1) - 1.0)))
        worst_row, worst_lo, worst_hi = max(worst_row, row), min(worst_lo, lam[0]), max(worst_hi, lam[-1])
        bad += not (np.array_equal(A, A.T) and row <= 1e-12 and lam[0] >= -1e-8 and lam[-1] <= 1 + 1e-8)
    dt = time.perf_counter() - t0
    report(1, bad == 0 and dt < 30,
           f"1000 kernels, {bad} violations, max row err {worst_row:.1e}, eig range [{worst_lo:.1e}, 1{worst_hi - 1:+.1e}], {dt:.1f}s")


def test_criterion_02_normalization_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        N = int(rng.integers(1, 13))
        A = build_stochastic_matrix(rng.random(N)).entries
        total = sum(float(minors_of_size(A, r)[1].sum()) for r in range(N + 1))
        Z = float(np.linalg.det(A + np.eye(N)))
        worst = max(worst, abs(total - Z) / Z)
    dt = time.perf_counter() - t0
    report(2, worst <= 1e-8 and dt < 60, f"200 kernels N<=12, worst relative error {worst:.1e}, {dt:.1f}s")


def test_criterion_03_bounded_probability():
    rng = np.random.default_rng(3)
    lo, hi = np.inf, -np.inf
    for _ in range(100):
        N = int(rng.integers(1, 13))
        A = build_stochastic_matrix(rng.random(N)).entries
        Z = float(np.linalg.det(A + np.eye(N)))
        for r in range(N + 1):
            p = minors_of_size(A, r)[1] / Z
            lo, hi = min(lo, float(p.min())), max(hi, float(p.max()))
    report(3, lo >= -1e-12 and hi <= 1 + 1e-12, f"100 kernels, all 2^N subsets, P in [{lo:.2e}, {hi:.4f}]")


def test_criterion_04_marginal_fidelity():
    t0 = time.perf_counter()
    p = np.random.default_rng(4).random(16)
    rep = monte_carlo_marginals(build_stochastic_matrix(p), 4, 200_000, Variant.PROBABILISTIC)
    frac = rep.fraction_within(3.0)
    dt = time.perf_counter() - t0
    report(4, frac >= 0.95 and dt < 300,
           f"N=16, 200k draws, {frac:.0%} of items within 3 s.e., max |z| {np.abs(rep.z_scores).max():.2f}, {dt:.0f}s")


def test_criterion_05_expected_size_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    ratios = []
    for t in range(10):
        lam = np.sort(rng.random(1000))[::-1]
        V = np.linalg.qr(rng.standard_normal((1000, 1000)))[0]
        ratios.append(len(sample_standard(SpectralDecomposition(lam, V), t)) / 1000)
    mean = float(np.mean(ratios))
    dt = time.perf_counter() - t0
    report(5, 0.29 <= mean <= 0.32 and dt < 120,
           f"N=1000, 10 trials, mean |Y|/N = {mean:.4f} (1 - ln 2 = {1 - np.log(2):.4f}), {dt:.1f}s")


def test_criterion_06_two_item_informativeness():
    grid = np.linspace(0, 1, 100)
    worst = 0.0
    prods, probs = [], []
    for a in grid:
        for b in grid:
            S = build_stochastic_matrix([a, b])
            got = subset_probability(S, [0, 1])
            expected = (1 - a * b) / np.linalg.det(S.entries + np.eye(2))
            worst = max(worst, abs(got - expected))
            prods.append(a * b)
            probs.append(got)
    order = np.argsort(prods, kind="stable")
    x, y = np.asarray(prods)[order], np.asarray(probs)[order]
    distinct = np.diff(x) > 1e-12
    monotone = bool(np.all(np.diff(y)[distinct] < 0) and np.all(np.abs(np.diff(y)[~distinct]) <= 1e-12))
    report(6, worst <= 1e-12 and monotone, f"100x100 grid, max error {worst:.1e}, strictly decreasing in p1*p2: {monotone}")


def test_criterion_07_kdpp_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    cases = [(10, 4), (8, 3), (6, 2), (5, 1), (9, 4)]
    for N, k in cases:
        table = kdpp_table(build_stochastic_matrix(rng.random(N)), k)
        draws = table.draw(rng, 100_000)
        freq = np.bincount(draws, minlength=table.probs.size) / draws.size
        worst = max(worst, 0.5 * float(np.abs(freq - table.probs).sum()))
    report(7, worst <= 0.02, f"(N,k) in {cases}, 100k draws each, worst TV {worst:.4f}")


def test_criterion_08_balanced_cardinality():
    rng = np.random.default_rng(8)
    bad = 0
    for t in range(100):
        sizes = rng.integers(1, 60, size=int(rng.integers(1, 8)))
        items = [ItemRecord(f"{c}-{j}", c, float(rng.random())) for c, n in enumerate(sizes) for j in range(n)]
        k = int(rng.integers(1, 40))
        variant = (Variant.PAPER_ARGMAX, Variant.PROBABILISTIC)[t % 2]
        out = balanced_resample(ClassManifest.from_items(items), SamplerConfig(k=k, seed=t, variant=variant))
        bad += [len(out[c]) for c in range(sizes.size)] != [min(k, int(n)) for n in sizes]
    report(8, bad == 0, f"100 random manifests, {bad} with class sizes != min(k, N_c)")


def test_criterion_09_bns_reduction_and_decomposition():
    rng = np.random.default_rng(9)
    red = dec = 0.0
    for _ in range(10_000):
        d, n, m = int(rng.choice([2, 8, 32])), int(rng.choice([1, 5, 20])), int(rng.choice([0, 1, 3, 6]))
        tau = float(rng.choice([0.1, 0.3, 1.0]))
        b = random_batch(rng, d, m, n)
        b0 = BnsBatch(b.anchor, b.positive, np.zeros((0, d)), b.negatives)
        red = max(red, abs(bns_loss(b0, BnsConfig(tau, 0, n)) - ns_loss(b0, BnsConfig(tau, 0, n))))
        inst, cls = bns_decomposition(b, BnsConfig(tau, m, n))
        dec = max(dec, abs(bns_loss(b, BnsConfig(tau, m, n)) + (inst + cls) / (m + 1)))
    report(9, red <= 1e-15 and dec <= 1e-12, f"10,000 batches, m=0 gap {red:.1e}, split gap {dec:.1e}")


def test_criterion_10_gradients():
    rng = np.random.default_rng(10)
    bns_worst = soft_worst = 0.0
    for _ in range(100):
        d, n, m = int(rng.choice([2, 8])), int(rng.choice([1, 5])), int(rng.choice([0, 3, 6]))
        cfg = BnsConfig(float(rng.choice([0.1, 0.3, 1.0])), m, n)
        b = random_batch(rng, d, m, n)
        g = bns_gradient(b, cfg)
        parts = [b.anchor, b.positive, b.extra_positives, b.negatives]
        for slot, (x, ga) in enumerate(zip(parts, [g.anchor, g.positive, g.extra_positives, g.negatives])):
            if x.size:
                def f(z, slot=slot):
                    p = list(parts)
                    p[slot] = z
                    return bns_loss(BnsBatch(*p), cfg)

                bns_worst = max(bns_worst, fd_relative_error(ga, central_difference(f, x)))
    for _ in range(100):
        C, d, n = int(rng.integers(2, 8)), int(rng.integers(1, 9)), int(rng.integers(1, 30))
        X, y = rng.standard_normal((n, d)), rng.integers(0, C, n)
        W, b = rng.standard_normal((C, d)), rng.standard_normal(C)
        _, gW, gb = softmax_loss_and_grad(W, b, X, y)
        soft_worst = max(
            soft_worst,
            fd_relative_error(gW, central_difference(lambda z: softmax_loss_and_grad(z, b, X, y)[0], W)),
            fd_relative_error(gb, central_difference(lambda z: softmax_loss_and_grad(W, z, X, y)[0], b)),
        )
    report(10, bns_worst <= 1e-5 and soft_worst <= 1e-5,
           f"100 configs each, worst relative error bns {bns_worst:.1e}, softmax {soft_worst:.1e}")


def test_criterion_11_nce_bound():
    rng = np.random.default_rng(11)
    worst = np.inf
    for _ in range(10_000):
        a, b = (int(v) for v in rng.integers(2, 7, size=2))
        j = random_joint(rng, a, b, sparsity=float(rng.choice([0.0, 0.3])))
        worst = min(worst, nce_bound_check(j, int(rng.integers(1, 11))).margin)
    report(11, worst >= -1e-10, f"10,000 joints, smallest margin MI - bound = {worst:.3e}")


def test_criterion_12_toy_bns_training():
    t0 = time.perf_counter()
    shrink = beats = 0
    for seed in range(10):
        X, y = toy_data(seed)
        with_m = train_toy_embeddings(X, y, BnsConfig(0.3, 3, 5), steps=200, lr=0.1, seed=seed)
        without = train_toy_embeddings(X, y, BnsConfig(0.3, 0, 5), steps=200, lr=0.1, seed=seed)
        shrink += with_m.intra_dist[-1] < with_m.intra_dist[0]
        beats += with_m.intra_dist[-1] < without.intra_dist[-1]
    dt = time.perf_counter() - t0
    report(12, shrink >= 9 and beats >= 8 and dt < 60,
           f"intra-class distance shrinks on {shrink}/10 seeds, m=3 beats m=0 on {beats}/10, {dt:.1f}s")


def test_criterion_13_two_stage_ordering():
    t0 = time.perf_counter()
    config = SyntheticConfig(num_classes=10, max_class_size=500, imbalance_factor=100)
    rep = run_two_stage(config, seeds=range(10))
    ip, rnd = rep.select(IP_DPP), rep.select(RANDOM)
    few_wins = sum(a.few >= b.few for a, b in zip(ip, rnd))
    gap = rep.mean(IP_DPP, "overall") - rep.mean(RANDOM, "overall")
    dt = time.perf_counter() - t0
    detail = (
        f"few-shot IP-DPP >= random on {few_wins}/10 seeds "
        f"(mean few {rep.mean(IP_DPP, 'few'):.3f} vs {rep.mean(RANDOM, 'few'):.3f}, full data {rep.mean(FULL, 'few'):.3f}), "
        f"overall gap {100 * gap:+.2f} pts, {dt:.0f}s"
    )
    report(13, few_wins >= 8 and gap >= -0.02 and dt < 300, detail)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
