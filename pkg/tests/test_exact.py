"""Exact crossing probabilities: closed form, DP, enumeration oracle, bounds.

The enumeration oracle is the ground truth everything else is checked
against; it sums explicit config probabilities with fsum, so its only error
source is final rounding.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from droperc.exact import (
    Prob,
    TransitionKernel,
    as_prob,
    bond_bounds,
    log1mexp,
    site_coupling_bound,
    theta_bond_dp,
    theta_bruteforce,
    theta_site,
)
from droperc.topology import Topology


def assert_consistent(p: Prob):
    """The three-field contract: logs track value and 1 - value."""
    assert 0.0 <= p.value <= 1.0
    if p.value > 1e-300:
        assert abs(math.exp(p.log_value) - p.value) <= 1e-14 * p.value
    c = 1.0 - p.value
    if c > 1e-300:
        assert abs(math.exp(p.log_complement) - c) <= 1e-14 * c


class TestLog1mexp:
    def test_endpoints(self):
        assert log1mexp(0.0) == -math.inf
        assert log1mexp(-math.inf) == 0.0
        with pytest.raises(ValueError):
            log1mexp(0.5)

    def test_complement_identity(self):
        for x in (-1e-15, -1e-8, -0.2, -math.log(2.0), -1.5, -40.0):
            total = math.exp(log1mexp(x)) + math.exp(x)
            assert abs(total - 1.0) <= 1e-14

    def test_tiny_argument_keeps_precision(self):
        # 1 - exp(-1e-18) = 1e-18 to first order; the log must see it
        assert abs(log1mexp(-1e-18) - math.log(1e-18)) < 1e-9


class TestProb:
    def test_from_value_range(self):
        for bad in (-0.1, 1.1, math.nan):
            with pytest.raises(ValueError):
                Prob.from_value(bad)

    def test_from_log_range(self):
        for bad in (0.1, math.nan):
            with pytest.raises(ValueError):
                Prob.from_log(bad)

    def test_endpoints(self):
        zero = Prob.from_value(0.0)
        assert zero.log_value == -math.inf and zero.log_complement == 0.0
        one = Prob.from_value(1.0)
        assert one.log_value == 0.0 and one.log_complement == -math.inf

    @given(st.floats(min_value=1e-50, max_value=1.0, allow_nan=False))
    def test_from_value_consistent(self, v):
        assert_consistent(Prob.from_value(v))

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_from_value_consistent_amplified(self, v):
        # below ~1e-56 no double log can reproduce the value to 1e-14
        # relative: exp's image spacing near -690 is |log|*2^-53 relative.
        # The attainable contract is the half-ulp of the log field.
        p = Prob.from_value(v)
        assert 0.0 <= p.value <= 1.0
        if p.value > 1e-300:
            tol = (abs(p.log_value) + 2.0) * 2.0**-53
            assert abs(math.exp(p.log_value) - p.value) <= tol * p.value
        c = 1.0 - p.value
        if c > 1e-300:
            assert abs(math.exp(p.log_complement) - c) <= 1e-14 * c

    @given(st.floats(min_value=-750.0, max_value=0.0, allow_nan=False))
    def test_from_log_consistent(self, lv):
        assert_consistent(Prob.from_log(lv))

    @given(
        st.floats(min_value=-100.0, max_value=0.0, allow_nan=False),
        st.floats(min_value=0.0, max_value=64.0, allow_nan=False),
    )
    def test_pow_consistent(self, lv, e):
        p = Prob.from_log(lv).pow(e)
        assert_consistent(p)
        assert abs(p.log_value - lv * e) <= 1e-12 * max(1.0, abs(lv * e))

    def test_pow_underflow_survives_in_log(self):
        # 0.5 ** 4096 is far below float minimum but its log is exact-ish
        tiny = Prob.from_value(0.5).pow(4096)
        assert tiny.value == 0.0
        assert abs(tiny.log_value - 4096 * math.log(0.5)) < 1e-9

    def test_pow_rejects_negative(self):
        with pytest.raises(ValueError):
            Prob.from_value(0.5).pow(-1)

    def test_complement_swaps(self):
        p = Prob.from_value(0.3)
        q = p.complement()
        assert q.value == 0.7
        assert q.log_value == p.log_complement
        assert_consistent(q)
        assert abs(q.complement().value - 0.3) <= 1e-15

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_complement_consistent(self, v):
        assert_consistent(Prob.from_value(v).complement())

    def test_float_coercion(self):
        assert float(Prob.from_value(0.25)) == 0.25
        assert as_prob(0.25).value == 0.25
        p = Prob.from_value(0.5)
        assert as_prob(p) is p


class TestKernel:
    @pytest.mark.parametrize("p", [0.0, 0.05, 0.3, 0.5, 0.9, 1.0])
    @pytest.mark.parametrize("width", [1, 2, 5, 17])
    def test_rows_are_distributions(self, p, width):
        rows = TransitionKernel.build(p, width).rows
        assert rows.shape == (width + 1, width + 1)
        assert np.all(rows >= 0.0)
        assert np.max(np.abs(rows.sum(axis=1) - 1.0)) <= 1e-12

    def test_row_zero_absorbs(self):
        rows = TransitionKernel.build(0.3, 6).rows
        assert rows[0, 0] == 1.0
        assert np.all(rows[0, 1:] == 0.0)

    @pytest.mark.parametrize("p", [0.05, 0.5, 0.95])
    def test_top_row_dominates(self, p):
        # more reached sources can only shift the next count upward:
        # the top row's cumulative mass sits below every other row's
        width = 7
        rows = TransitionKernel.build(p, width).rows
        top = np.cumsum(rows[width])
        for n in range(width + 1):
            assert np.all(top <= np.cumsum(rows[n]) + 1e-12)

    def test_rows_match_direct_binomial(self):
        p, width = 0.37, 5
        rows = TransitionKernel.build(p, width).rows
        for n in range(width + 1):
            hit = 1.0 - p**n
            for k in range(width + 1):
                direct = math.comb(width, k) * hit**k * (1 - hit) ** (width - k)
                assert abs(rows[n, k] - direct) <= 1e-13

    def test_large_width_stays_finite(self):
        rows = TransitionKernel.build(0.5, 512).rows
        assert np.all(np.isfinite(rows))
        assert np.max(np.abs(rows.sum(axis=1) - 1.0)) <= 1e-12

    def test_endpoint_rows(self):
        rows0 = TransitionKernel.build(0.0, 3).rows
        # nothing removed: any reached source wires every next vertex
        assert rows0[1, 3] == 1.0 and rows0[3, 3] == 1.0
        rows1 = TransitionKernel.build(1.0, 3).rows
        assert np.all(rows1[:, 0] == 1.0)

    def test_shape_validated(self):
        with pytest.raises(ValueError):
            TransitionKernel(width=2, p=Prob.from_value(0.5), rows=np.ones((2, 3)))

    def test_width_validated(self):
        with pytest.raises(ValueError):
            TransitionKernel.build(0.5, 0)

    def test_rows_frozen(self):
        rows = TransitionKernel.build(0.25, 3).rows
        with pytest.raises(ValueError):
            rows[0, 0] = 0.5


class TestThetaSite:
    def test_endpoints(self):
        topo = Topology(3, 4)
        assert theta_site(0.0, topo).value == 1.0
        assert theta_site(1.0, topo).value == 0.0

    def test_frozen_example(self):
        assert abs(theta_site(0.5, Topology(2, 3)).value - 0.421875) <= 1e-15

    def test_matches_enumeration(self):
        for w, depth in [(1, 1), (2, 2), (3, 2), (2, 5), (4, 3)]:
            topo = Topology(w, depth)
            for p in np.arange(0.1, 0.95, 0.1):
                exact = theta_site(p, topo).value
                brute = theta_bruteforce("site", p, topo).value
                assert abs(exact - brute) <= 1e-12

    def test_needs_hidden_layer(self):
        with pytest.raises(ValueError):
            theta_site(0.5, Topology(2, 0))

    def test_deep_value_is_consistent(self):
        assert_consistent(theta_site(0.9, Topology(2, 10**6)))
        assert_consistent(theta_site(1e-9, Topology(4, 10**6)))


class TestThetaBondDp:
    def test_frozen_examples(self):
        assert theta_bond_dp(0.5, Topology(1, 1)).value == 0.25
        assert theta_bond_dp(0.5, Topology(2, 1)).value == 0.80859375

    def test_width_one_closed_form(self):
        # W=1: crossing needs every one of the L+1 edges, so (1-p)^(L+1)
        for p in (0.1, 0.5, 0.8):
            for depth in (0, 1, 4):
                got = theta_bond_dp(p, Topology(1, depth)).value
                assert abs(got - (1 - p) ** (depth + 1)) <= 1e-15

    def test_endpoints(self):
        topo = Topology(3, 2)
        assert theta_bond_dp(0.0, topo).value == 1.0
        assert theta_bond_dp(1.0, topo).value == 0.0

    def test_matches_enumeration(self):
        for w, depth in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)]:
            topo = Topology(w, depth)
            for p in np.arange(0.1, 0.95, 0.1):
                dp = theta_bond_dp(p, topo).value
                brute = theta_bruteforce("bond", p, topo).value
                assert abs(dp - brute) <= 1e-12

    def test_single_edge_layer(self):
        # depth 0, W=2: crossing iff any of the 4 edges survives
        p = 0.3
        got = theta_bond_dp(p, Topology(2, 0)).value
        assert abs(got - (1 - p**4)) <= 1e-15

    def test_deep_network_stays_finite(self):
        th = theta_bond_dp(0.5, Topology(64, 10**6))
        assert not math.isnan(th.value)
        assert 0.0 <= th.value <= 1.0
        assert_consistent(th)

    def test_tiny_survival_keeps_relative_precision(self):
        # p=0.9, W=1, L=32: theta = 0.1^33; the complement branch of the DP
        # must not lose it to cancellation
        th = theta_bond_dp(0.9, Topology(1, 32))
        expect = 0.1**33
        assert abs(th.value - expect) <= 1e-12 * expect


class TestBruteforce:
    def test_budget_enforced(self):
        with pytest.raises(ValueError):
            theta_bruteforce("bond", 0.5, Topology(3, 2))  # 27 flags

    def test_model_validated(self):
        with pytest.raises(ValueError):
            theta_bruteforce("loop", 0.5, Topology(2, 1))

    def test_site_needs_hidden_layer(self):
        with pytest.raises(ValueError):
            theta_bruteforce("site", 0.5, Topology(2, 0))

    def test_endpoints(self):
        topo = Topology(2, 2)
        assert theta_bruteforce("bond", 0.0, topo).value == 1.0
        assert theta_bruteforce("bond", 1.0, topo).value == 0.0

    def test_enumeration_is_chunk_independent(self):
        # 2^21 configs forces at least two chunks; spot value is a
        # polynomial identity independent of the chunking
        topo = Topology(3, 1)  # 18 flags, single chunk
        one = theta_bruteforce("bond", 0.35, topo).value
        assert 0.0 < one < 1.0
        big = Topology(2, 5)  # 24 flags, 16 chunks
        val = theta_bruteforce("bond", 0.5, big).value
        dp = theta_bond_dp(0.5, big).value
        assert abs(val - dp) <= 1e-12


class TestBounds:
    def test_frozen_example(self):
        lower, upper = bond_bounds(0.5, Topology(2, 1))
        assert abs(lower.value - 0.5625) <= 1e-15
        assert abs(upper.value - 0.87890625) <= 1e-15

    def test_sandwich_on_sample_grid(self):
        for p in (0.05, 0.3, 0.6, 0.95):
            for w in (1, 2, 5):
                for depth in (0, 1, 7, 32):
                    topo = Topology(w, depth)
                    th = theta_bond_dp(p, topo).value
                    lower, upper = bond_bounds(p, topo)
                    assert lower.value <= th + 1e-12
                    assert th <= upper.value + 1e-12

    def test_coupling_bound_example(self):
        got = site_coupling_bound(0.5, Topology(2, 1))
        assert abs(got.value - 0.9375) <= 1e-15

    def test_coupling_bound_on_sample_grid(self):
        for p in (0.1, 0.5, 0.9):
            for w in (1, 3):
                for depth in (1, 6):
                    topo = Topology(w, depth)
                    th = theta_bond_dp(p, topo).value
                    assert th <= site_coupling_bound(p, topo).value + 1e-12

    def test_coupling_bound_needs_hidden_layer(self):
        with pytest.raises(ValueError):
            site_coupling_bound(0.5, Topology(2, 0))


class TestMonotonicity:
    def test_nonincreasing_in_p(self):
        for w, depth in [(1, 3), (3, 2), (5, 8)]:
            topo = Topology(w, depth)
            values = [theta_bond_dp(p, topo).value for p in np.arange(0.05, 1.0, 0.05)]
            for a, b in zip(values, values[1:]):
                assert b <= a + 1e-12

    def test_nondecreasing_in_width(self):
        for p in (0.2, 0.5, 0.8):
            for depth in (0, 4):
                values = [theta_bond_dp(p, Topology(w, depth)).value for w in range(1, 9)]
                for a, b in zip(values, values[1:]):
                    assert b >= a - 1e-12
