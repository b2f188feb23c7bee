import numpy as np
import pytest

from tailsampler.data_model import ClassManifest, ItemRecord, Variant
from tailsampler.errors import DegenerateSupport, EmptyClass, GroundSetTooLarge, KTooLarge, MissingProbability
from tailsampler.ipdpp import (
    SamplerConfig,
    balanced_resample,
    exact_kdpp_oracle,
    kdpp_table,
    sample_k,
    select_k_eigenvectors,
    selected_indices,
)
from tailsampler.stochastic_matrix import build_stochastic_matrix


def _manifest(sizes, rng, num_classes=None):
    items = [ItemRecord(f"c{c}-{j}", c, float(rng.random())) for c, n in enumerate(sizes) for j in range(n)]
    return ClassManifest.from_items(items, num_classes)


class TestEigenvectorWalk:
    def test_stops_at_k(self):
        assert select_k_eigenvectors(np.ones(5), np.zeros(5), 2, topup=False) == [0, 1]

    def test_topup_fills_in_descending_order(self):
        lam = np.array([0.9, 0.8, 0.7, 0.6])
        assert select_k_eigenvectors(lam, np.ones(4), 3, topup=True) == [0, 1, 2]
        assert select_k_eigenvectors(lam, np.ones(4), 3, topup=False) == []

    def test_topup_respects_rank(self):
        lam = np.array([1.0, 0.0, 0.0])
        assert select_k_eigenvectors(lam, np.ones(3), 2, topup=True) == [0]


class TestSampleK:
    def test_hand_trace(self):
        seeds = [s for s in range(100) if np.random.default_rng(s).random(2)[0] < 0.5]
        S = build_stochastic_matrix([1.0, 1.0])
        for s in seeds[:10]:
            assert sample_k(S, SamplerConfig(k=1, seed=s)).sorted() == [0]

    def test_identity_full_set(self):
        for seed in range(20):
            assert sample_k(np.eye(6), SamplerConfig(k=6, seed=seed)).sorted() == list(range(6))

    def test_fixed_cardinality(self):
        S = build_stochastic_matrix(np.random.default_rng(0).random(8))
        for seed in range(10_000):
            assert len(sample_k(S, SamplerConfig(k=3, seed=seed))) == 3

    @pytest.mark.parametrize("variant", [Variant.PAPER_ARGMAX, Variant.PROBABILISTIC])
    def test_cardinality_is_min_k_rank(self, variant):
        rng = np.random.default_rng(1)
        for seed in range(200):
            N = int(rng.integers(2, 20))
            p = rng.random(N)
            p[rng.random(N) < 0.3] = 1.0
            S = build_stochastic_matrix(p)
            k = int(rng.integers(1, N + 1))
            out = sample_k(S, SamplerConfig(k=k, seed=seed, variant=variant))
            assert len(out) == min(k, S.spectral.rank)

    def test_without_topup_can_fall_short(self):
        S = build_stochastic_matrix(np.random.default_rng(2).random(10))
        sizes = {len(sample_k(S, SamplerConfig(k=8, seed=s, topup=False))) for s in range(200)}
        assert max(sizes) <= 8 and min(sizes) < 8

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            sample_k(np.eye(3), SamplerConfig(k=4))

    def test_deterministic(self):
        S = build_stochastic_matrix(np.random.default_rng(3).random(25))
        cfg = SamplerConfig(k=7, seed=99, variant=Variant.PROBABILISTIC)
        assert sample_k(S, cfg) == sample_k(S, cfg)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            SamplerConfig(k=0)


class TestExactKdpp:
    def test_uniform_singletons(self):
        t = kdpp_table(build_stochastic_matrix([1.0, 1.0]), 1)
        np.testing.assert_allclose(t.probs, [0.5, 0.5], atol=1e-15)

    def test_degenerate_pair(self):
        with pytest.raises(DegenerateSupport):
            kdpp_table(build_stochastic_matrix([1.0, 1.0]), 2)

    def test_three_item_table_and_draws(self):
        # 2x2 minors of the kernel built from (0.9, 0.6, 0.3), worked out by hand
        minors = np.array([0.73 * 0.76 - 0.18**2, 0.73 * 0.85 - 0.09**2, 0.76 * 0.85 - 0.06**2])
        t = kdpp_table(build_stochastic_matrix([0.9, 0.6, 0.3]), 2)
        assert [tuple(r) for r in t.subsets] == [(0, 1), (0, 2), (1, 2)]
        np.testing.assert_allclose(t.probs, minors / minors.sum(), atol=1e-14)
        draws = t.draw(np.random.default_rng(0), 100_000)
        freq = np.bincount(draws, minlength=3) / draws.size
        assert 0.5 * np.abs(freq - t.probs).sum() <= 0.02

    def test_oracle_variant(self):
        S = build_stochastic_matrix([0.9, 0.6, 0.3, 0.2])
        out = sample_k(S, SamplerConfig(k=2, seed=4, variant=Variant.EXACT_KDPP_ORACLE))
        assert out == exact_kdpp_oracle(S, 2, 4)
        assert len(out) == 2

    def test_too_large(self):
        with pytest.raises(GroundSetTooLarge):
            kdpp_table(np.eye(13), 2)


class TestBalancedResample:
    def test_min_rule(self):
        m = _manifest([100, 50, 5], np.random.default_rng(0))
        out = balanced_resample(m, SamplerConfig(k=10, seed=42))
        assert [len(out[c]) for c in range(3)] == [10, 10, 5]
        for c, s in out.items():
            assert set(m.labels[list(s.indices)]) == {c}

    def test_large_k_is_identity(self):
        m = _manifest([7, 4, 2], np.random.default_rng(1))
        assert selected_indices(balanced_resample(m, SamplerConfig(k=50))) == list(range(len(m)))

    def test_default_k(self):
        m = _manifest([30, 10, 5], np.random.default_rng(2))
        assert SamplerConfig.for_manifest(m).k == 50

    def test_random_manifests(self):
        rng = np.random.default_rng(3)
        for t in range(100):
            sizes = rng.integers(1, 40, size=int(rng.integers(1, 6)))
            k = int(rng.integers(1, 30))
            out = balanced_resample(_manifest(sizes, rng), SamplerConfig(k=k, seed=t))
            assert [len(out[c]) for c in range(sizes.size)] == [min(k, n) for n in sizes]

    def test_saturated_probabilities_still_fill(self):
        items = [ItemRecord(f"a{j}", 0, 1.0) for j in range(20)]
        out = balanced_resample(ClassManifest.from_items(items), SamplerConfig(k=6))
        assert len(out[0]) == 6

    def test_thread_count_does_not_change_result(self, monkeypatch):
        m = _manifest([60, 40, 25, 12], np.random.default_rng(4))
        cfg = SamplerConfig(k=10, seed=5, variant=Variant.PROBABILISTIC)
        monkeypatch.setenv("TAILSAMPLER_THREADS", "0")
        a = balanced_resample(m, cfg)
        monkeypatch.setenv("TAILSAMPLER_THREADS", "4")
        assert balanced_resample(m, cfg) == a

    def test_prefers_low_confidence_items(self):
        # counted per class sample: the selected mean p sits at or below the class mean
        hits = total = 0
        for t in range(100):
            rng = np.random.default_rng(5000 + t)
            sizes = rng.integers(10, 61, size=int(rng.integers(2, 6)))
            m = _manifest(sizes, rng)
            k = int(rng.integers(1, sizes.min()))
            out = balanced_resample(m, SamplerConfig(k=k, seed=t, variant=Variant.PROBABILISTIC))
            for c, s in out.items():
                hits += m.probabilities[list(s.indices)].mean() <= m.probabilities[m.indices_of(c)].mean()
                total += 1
        assert hits / total >= 0.9

    def test_missing_probability(self):
        m = ClassManifest.from_items([ItemRecord("a", 0, 0.5), ItemRecord("b", 0, None)])
        with pytest.raises(MissingProbability):
            balanced_resample(m, SamplerConfig(k=1))

    def test_empty_class(self):
        m = ClassManifest.from_items([ItemRecord("a", 0, 0.5), ItemRecord("b", 2, 0.5)])
        with pytest.raises(EmptyClass):
            balanced_resample(m, SamplerConfig(k=1))
