"""Tests for stream derivation, samplers, couplings, and the estimator."""

import math

import numpy as np
import pytest

import droperc.montecarlo as mc
from droperc.exact import theta_bond_dp, theta_site
from droperc.montecarlo import (
    Estimate,
    coupled_sample_p,
    coupled_sample_w,
    estimate_theta,
    sample,
    site_from_bond,
    stream,
)
from droperc.topology import BondConfig, SiteConfig, Topology, crossing


class TestStream:
    def test_rejects_negative_seed(self):
        with pytest.raises(ValueError):
            stream(-1)

    def test_rejects_oversized_seed(self):
        with pytest.raises(ValueError):
            stream(1 << 64)

    def test_rejects_negative_path_index(self):
        with pytest.raises(ValueError):
            stream(7, 0, -2)

    def test_same_path_same_draws(self):
        a = stream(123, 4, 5).random(8)
        b = stream(123, 4, 5).random(8)
        assert np.array_equal(a, b)

    def test_distinct_paths_differ(self):
        a = stream(123, 4, 5).random(8)
        b = stream(123, 4, 6).random(8)
        c = stream(123, 5, 5).random(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_root_differs_from_child(self):
        a = stream(123).random(8)
        b = stream(123, 0).random(8)
        assert not np.array_equal(a, b)

    def test_seed_matters(self):
        a = stream(1, 2).random(8)
        b = stream(2, 2).random(8)
        assert not np.array_equal(a, b)


class TestSample:
    def test_rejects_bad_p(self):
        topo = Topology(2, 1)
        for bad in (-0.1, 1.1, math.nan):
            with pytest.raises(ValueError):
                sample("bond", bad, topo, stream(0))

    def test_rejects_bad_model(self):
        with pytest.raises(ValueError):
            sample("edge", 0.5, Topology(2, 1), stream(0))

    def test_p_zero_keeps_everything(self):
        topo = Topology(3, 2)
        assert sample("bond", 0.0, topo, stream(1)).present.all()
        assert sample("site", 0.0, topo, stream(1)).present.all()

    def test_p_one_removes_everything(self):
        topo = Topology(3, 2)
        assert not sample("bond", 1.0, topo, stream(1)).present.any()
        assert not sample("site", 1.0, topo, stream(1)).present.any()

    def test_types_and_shapes(self):
        topo = Topology(3, 2)
        bond = sample("bond", 0.5, topo, stream(2))
        site = sample("site", 0.5, topo, stream(2))
        assert isinstance(bond, BondConfig) and bond.present.shape == (3, 3, 3)
        assert isinstance(site, SiteConfig) and site.present.shape == (2, 3)

    def test_same_stream_same_config(self):
        topo = Topology(4, 3)
        a = sample("bond", 0.4, topo, stream(9, 1))
        b = sample("bond", 0.4, topo, stream(9, 1))
        assert np.array_equal(a.present, b.present)

    def test_keep_rate_matches_marginal(self):
        # one uniform per flag, kept iff u >= p
        topo = Topology(4, 3)
        keeps = [sample("bond", 0.3, topo, stream(11, i)).present for i in range(400)]
        total = sum(k.sum() for k in keeps)
        n = 400 * keeps[0][0].size * 4
        q = 0.7
        assert abs(total / n - q) <= 4.0 * math.sqrt(q * (1 - q) / n)


class TestEstimate:
    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            Estimate(mean=0.0, stderr=0.0, trials=0, successes=0, seed=0)

    def test_rejects_success_overflow(self):
        with pytest.raises(ValueError):
            Estimate(mean=1.0, stderr=0.0, trials=3, successes=4, seed=0)

    def test_stderr_is_binomial_plugin(self):
        est = estimate_theta("bond", 0.5, Topology(2, 1), 500, seed=3)
        assert est.stderr == math.sqrt(est.mean * (1.0 - est.mean) / 500)
        assert est.mean == est.successes / est.trials


class TestEstimateTheta:
    def test_validation(self):
        topo = Topology(2, 1)
        with pytest.raises(ValueError):
            estimate_theta("bond", 0.5, topo, 0, seed=0)
        with pytest.raises(ValueError):
            estimate_theta("edge", 0.5, topo, 10, seed=0)
        with pytest.raises(ValueError):
            estimate_theta("bond", 1.5, topo, 10, seed=0)

    def test_p_zero_always_crosses(self):
        est = estimate_theta("site", 0.0, Topology(2, 3), 64, seed=5)
        assert est.mean == 1.0 and est.stderr == 0.0 and est.successes == 64

    def test_p_one_never_crosses(self):
        est = estimate_theta("bond", 1.0, Topology(2, 1), 64, seed=5)
        assert est.mean == 0.0 and est.successes == 0

    def test_deterministic_across_runs(self):
        a = estimate_theta("site", 0.4, Topology(3, 2), 300, seed=17)
        b = estimate_theta("site", 0.4, Topology(3, 2), 300, seed=17)
        assert a == b

    def test_matches_per_trial_streams(self):
        # trial i must come from stream(seed, i) no matter how the loop chunks
        topo = Topology(2, 2)
        n = 37
        manual = sum(
            crossing(sample("bond", 0.5, topo, stream(21, i))) for i in range(n)
        )
        est = estimate_theta("bond", 0.5, topo, n, seed=21)
        assert est.successes == manual

    def test_chunk_size_is_invisible(self, monkeypatch):
        topo = Topology(2, 2)
        baseline = estimate_theta("site", 0.5, topo, 100, seed=8)
        monkeypatch.setattr(mc, "_ESTIMATE_CHUNK", 7)
        assert estimate_theta("site", 0.5, topo, 100, seed=8) == baseline

    def test_agrees_with_exact_bond(self):
        topo = Topology(2, 1)
        est = estimate_theta("bond", 0.5, topo, 10_000, seed=33)
        exact = theta_bond_dp(0.5, topo).value
        assert abs(est.mean - exact) <= 4.0 * est.stderr

    def test_agrees_with_exact_site(self):
        topo = Topology(2, 3)
        est = estimate_theta("site", 0.5, topo, 10_000, seed=34)
        exact = theta_site(0.5, topo).value
        assert abs(est.mean - exact) <= 4.0 * est.stderr


class TestCoupledSampleP:
    def test_validation(self):
        topo = Topology(2, 1)
        rng = stream(0)
        for p1, p2 in ((0.7, 0.3), (0.0, 0.5), (0.5, 1.0), (-0.1, 0.5)):
            with pytest.raises(ValueError):
                coupled_sample_p(p1, p2, topo, rng)

    def test_equal_rates_give_identical_configs(self):
        g1, g2 = coupled_sample_p(0.4, 0.4, Topology(3, 2), stream(6))
        assert np.array_equal(g1.present, g2.present)

    def test_heavier_removal_is_subset(self):
        topo = Topology(3, 2)
        rng = stream(7)
        for _ in range(200):
            g1, g2 = coupled_sample_p(0.3, 0.7, topo, rng)
            assert not (g2.present & ~g1.present).any()
            if crossing(g2):
                assert crossing(g1)

    def test_marginals_match_rates(self):
        topo = Topology(2, 2)
        rng = stream(8)
        k1 = k2 = 0
        n_pairs = 4000
        for _ in range(n_pairs):
            g1, g2 = coupled_sample_p(0.3, 0.6, topo, rng)
            k1 += int(g1.present.sum())
            k2 += int(g2.present.sum())
        n = n_pairs * g1.present.size
        for kept, q in ((k1, 0.7), (k2, 0.4)):
            assert abs(kept / n - q) <= 4.0 * math.sqrt(q * (1 - q) / n)


class TestCoupledSampleW:
    def test_validation(self):
        with pytest.raises(ValueError):
            coupled_sample_w(0.5, 3, 2, 1, stream(0))
        with pytest.raises(ValueError):
            coupled_sample_w(0.5, 0, 2, 1, stream(0))
        with pytest.raises(ValueError):
            coupled_sample_w(1.5, 1, 2, 1, stream(0))

    def test_equal_widths_give_identical_configs(self):
        narrow, wide = coupled_sample_w(0.5, 3, 3, 2, stream(10))
        assert np.array_equal(narrow.present, wide.present)

    def test_narrow_is_corner_restriction(self):
        narrow, wide = coupled_sample_w(0.5, 2, 5, 3, stream(11))
        assert narrow.topology == Topology(2, 3)
        assert wide.topology == Topology(5, 3)
        assert np.array_equal(narrow.present, wide.present[:, :2, :2])

    def test_narrow_crossing_implies_wide(self):
        rng = stream(12)
        for _ in range(200):
            narrow, wide = coupled_sample_w(0.6, 2, 4, 2, rng)
            if crossing(narrow):
                assert crossing(wide)


class TestSiteFromBond:
    def test_needs_hidden_layer(self):
        cfg = sample("bond", 0.5, Topology(2, 0), stream(0))
        with pytest.raises(ValueError):
            site_from_bond(cfg)

    def test_full_projects_to_full(self):
        cfg = sample("bond", 0.0, Topology(3, 2), stream(1))
        assert site_from_bond(cfg).present.all()

    def test_empty_projects_to_empty(self):
        cfg = sample("bond", 1.0, Topology(3, 2), stream(1))
        assert not site_from_bond(cfg).present.any()

    def test_vertex_survives_iff_fed(self):
        cfg = sample("bond", 0.5, Topology(3, 3), stream(2))
        proj = site_from_bond(cfg)
        for l in range(3):
            for v in range(3):
                assert proj.present[l, v] == cfg.present[l, :, v].any()

    def test_crossing_preserved(self):
        topo = Topology(2, 3)
        rng_idx = 0
        seen = 0
        while seen < 60:
            cfg = sample("bond", 0.45, topo, stream(13, rng_idx))
            rng_idx += 1
            if crossing(cfg):
                seen += 1
                assert crossing(site_from_bond(cfg))

    def test_projection_rate_is_one_minus_p_pow_w(self):
        # disjoint incoming edge sets: survival rate 1 - p**W per vertex
        topo = Topology(2, 2)
        kept = 0
        n_cfg = 8000
        for i in range(n_cfg):
            kept += int(site_from_bond(sample("bond", 0.5, topo, stream(14, i))).present.sum())
        n = n_cfg * 4
        q = 1.0 - 0.5**2
        assert abs(kept / n - q) <= 4.0 * math.sqrt(q * (1 - q) / n)
