import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmmi.exponents import CompoundClass, ExponentCurve, erf, esp, esp_derivative, f_R_builder
from fmmi.probkit import bsc, mutual_information
from fmmi.weightfn import WeightFn
from fmmi.weighting import (
    ProblemSpec,
    ck_lambda_range,
    exponent_pair,
    exponent_pair_for_channel,
    forney_exponents,
    optimal_exponents,
    optimal_F_list,
    optimal_F_single,
    universality_check,
)

from conftest import random_channel
from oracles import bsc_esp, bsc_h_scan, er_symmetric

U2 = np.array([0.5, 0.5])
C01 = 1 - (-0.1 * math.log2(0.1) - 0.9 * math.log2(0.9))


def spec01(delta, W=None, R=0.1):
    return ProblemSpec.from_delta(R, U2, W if W is not None else bsc(0.1), delta)


class TestProblemSpec:
    def test_delta_consistent(self):
        s = ProblemSpec(0.1, U2, bsc(0.1), 0.3538)
        assert s.delta == pytest.approx(0.3538 - bsc_esp(0.1, 0.1), abs=1e-9)

    def test_rejects_negative_alpha(self):
        with pytest.raises(ValueError):
            ProblemSpec(0.1, U2, bsc(0.1), -0.01)
        with pytest.raises(ValueError):
            optimal_F_list(ProblemSpec.from_delta(0.1, U2, bsc(0.1), -0.3))


class TestOptimalF:
    def test_zero_slack_is_F_R(self):
        F = optimal_F_list(spec01(0.0))
        FR = f_R_builder(0.1, U2, bsc(0.1))
        t = np.linspace(0, C01 - 0.1, 200)
        assert F(0.0) == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(F(t), FR(t), atol=1e-6)

    def test_above_capacity_is_threshold(self):
        s = ProblemSpec(0.6, U2, bsc(0.1), 0.2)
        F = optimal_F_list(s)
        t = np.linspace(-0.6, 0.4, 50)
        assert np.all(F(t) == 0.2)
        assert optimal_exponents(s).regime == "threshold"

    def test_interval_class_uses_noisiest(self):
        W = CompoundClass.bsc_interval(0.01, 0.1)
        F = optimal_F_list(spec01(0.1, W))
        e0 = bsc_esp(0.1, 0.1)
        for t in np.linspace(0.0, C01 - 0.1, 15):
            assert F(t) == pytest.approx(0.1 + e0 - bsc_esp(0.1 + t, 0.1), abs=1e-6)
        # constant below zero
        assert np.allclose(F(np.linspace(-0.1, 0, 10)), 0.1, atol=1e-12)

    def test_single_dominates_list_and_identity(self):
        s = spec01(0.05)
        FL, FS = optimal_F_list(s), optimal_F_single(s)
        t = np.linspace(-0.1, 0.9, 1001)
        assert np.all(FS(t) >= FL(t) - 1e-12)
        assert np.all(FS(t) >= t - 1e-12)
        pl = exponent_pair(0.1, U2, bsc(0.1), FL)
        ps = exponent_pair(0.1, U2, bsc(0.1), FS)
        assert ps.E_erase <= pl.E_erase + 1e-9
        assert ps.E_i >= pl.E_i - 1e-9

    def test_single_equals_list_when_dominated(self):
        s = spec01(0.4)
        FL, FS = optimal_F_list(s), optimal_F_single(s)
        t = np.linspace(-0.1, 0.9, 301)
        if np.all(FL(t) >= t):
            assert np.allclose(FS(t), FL(t), atol=1e-12)
        # near the top of the domain the identity branch wins
        assert FS(0.9) == pytest.approx(0.9) or FL(0.9) >= 0.9

    @settings(max_examples=15)
    @given(st.integers(0, 10_000), st.floats(0.2, 0.8), st.floats(0.0, 0.3))
    def test_membership_on_random_explicit_classes(self, seed, frac, d):
        rng = np.random.default_rng(seed)
        W = CompoundClass.explicit([random_channel(rng, 2, 3, floor=0.05) for _ in range(3)])
        curve = ExponentCurve(U2, W)
        R = frac * curve.I_min
        s = ProblemSpec.from_delta(R, U2, W, d)
        assert erf(R, U2, W, optimal_F_list(s)) == pytest.approx(s.alpha, abs=1e-4)


class TestFeasibility:
    """Weighting functions above the optimum keep the exponent; dipping below an active point loses it."""

    def _setup(self):
        s = spec01(0.1)
        return s, optimal_F_list(s)

    @settings(max_examples=20)
    @given(st.lists(st.floats(0.0, 0.2), min_size=4, max_size=10))
    def test_dominating_G_is_feasible(self, bumps):
        s, F = self._setup()
        t = F.t
        extra = np.interp(t, np.linspace(t[0], t[-1], len(bumps)), np.maximum.accumulate(bumps))
        G = WeightFn(t, F.v + extra)
        assert erf(0.1, U2, bsc(0.1), G) >= s.alpha - 1e-6

    @pytest.mark.parametrize("t0", [0.05, 0.15, 0.3])
    def test_dip_below_is_infeasible(self, t0):
        s, F = self._setup()
        # pull F down by 0.01 on [t0 - 0.02, t0]; a running max keeps it nondecreasing
        t = np.union1d(F.t, [t0 - 0.02, t0])
        v = F(t)
        v = np.where((t >= t0 - 0.02) & (t <= t0), np.minimum(v, F(t0) - 0.01), v)
        G = WeightFn(t, np.maximum.accumulate(v))
        assert G(t0) < F(t0)
        assert erf(0.1, U2, bsc(0.1), G) < s.alpha - 1e-3


class TestExponentPairs:
    @pytest.mark.parametrize("R", [0.05, 0.15, 0.3])
    def test_relu_gives_random_coding_twice(self, R):
        F = WeightFn.ck(0.0, 1.0, -R, 1 - R)
        p = exponent_pair_for_channel(R, U2, bsc(0.1), F)
        er = er_symmetric(R, bsc(0.1).rows, U2)
        assert p.E_i == pytest.approx(er, abs=1e-8)
        assert p.E_erase == pytest.approx(er, abs=1e-8)

    def test_threshold_pair(self):
        for d in (0.05, 0.2, 0.3):
            p = exponent_pair_for_channel(0.1, U2, bsc(0.1), WeightFn.threshold(d, -0.1, 0.9))
            assert p.E_i == pytest.approx(d, abs=1e-12)
            assert p.E_erase == pytest.approx(bsc_esp(0.1 + d, 0.1), abs=1e-7)

    def test_zero_erasure_when_rate_plus_offset_exceeds_I(self):
        F = WeightFn.threshold(0.5, -0.1, 0.9)
        assert 0.1 + F(0.0) >= mutual_information(U2, bsc(0.1))
        assert exponent_pair_for_channel(0.1, U2, bsc(0.1), F).E_erase == 0.0


class TestRegimes:
    def test_regime_one_example(self):
        p = optimal_exponents(spec01(0.25))
        assert p.regime == "I"
        assert p.E_erase == pytest.approx(bsc_esp(0.35, 0.1), abs=1e-7)
        assert p.info["erf_check"][0] == pytest.approx(p.E_i, abs=1e-4)
        assert p.info["erf_check"][1] == pytest.approx(p.E_erase, abs=1e-4)

    def test_regime_one_on_interval_class(self):
        W = CompoundClass.bsc_interval(0.01, 0.1)
        p = optimal_exponents(spec01(0.25, W))
        assert p.E_erase == pytest.approx(bsc_esp(0.35, 0.1), abs=1e-7)

    def test_top_of_range_gives_zero(self):
        s = spec01(C01 - 0.1)
        assert optimal_exponents(s).E_erase == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("delta,regime", [(0.05, "II"), (0.1, "II"), (-0.05, "III")])
    def test_small_slack_against_scan(self, delta, regime):
        p = optimal_exponents(spec01(delta))
        assert p.regime == regime
        assert p.E_erase == pytest.approx(bsc_h_scan(0.1, delta, 0.1), abs=1e-7)
        assert p.info["erf_check"][1] == pytest.approx(p.E_erase, abs=1e-4)

    def test_outside_range_raises(self):
        with pytest.raises(ValueError):
            optimal_exponents(spec01(C01))

    def test_boundary_goes_to_regime_one(self):
        from fmmi.exponents import conjugate_rate
        d = conjugate_rate(0.1, U2, bsc(0.1)) - 0.1
        p = optimal_exponents(spec01(d))
        assert p.regime == "I"

    def test_monotone_tradeoff(self):
        alphas = bsc_esp(0.1, 0.1) + np.linspace(-0.08, C01 - 0.1, 25)
        ee = [optimal_exponents(ProblemSpec(0.1, U2, bsc(0.1), a), crosscheck=False).E_erase for a in alphas]
        assert np.all(np.diff(ee) <= 1e-9)

    def test_erasure_below_incorrect_in_target_regime(self):
        for d in (0.0, 0.1, 0.25):
            p = optimal_exponents(spec01(d), crosscheck=False)
            assert 0 <= p.E_erase <= p.E_i


class TestCKRange:
    def test_bsc_example(self):
        lo, hi = ck_lambda_range(spec01(0.25))
        h = 1e-6
        fd = lambda r: (bsc_esp(r + h, 0.1) - bsc_esp(r - h, 0.1)) / (2 * h)
        # log(mu / mu_R) / log(mu_R) with mu = 9 gives 1.8457
        assert lo == pytest.approx(-fd(0.1), abs=1e-6)
        assert lo == pytest.approx(1.8457, abs=1e-4)
        assert hi == pytest.approx(-1 / fd(0.35), rel=1e-6)

    def test_boundary_collapses(self):
        from fmmi.exponents import conjugate_rate
        d = conjugate_rate(0.1, U2, bsc(0.1)) - 0.1
        lo, hi = ck_lambda_range(spec01(d))
        assert lo == pytest.approx(hi, rel=1e-6)

    def test_empty_below_boundary(self):
        assert ck_lambda_range(spec01(0.1)) is None

    def test_top_is_unbounded(self):
        lo, hi = ck_lambda_range(spec01(C01 - 0.1))
        assert hi == math.inf


class TestUniversality:
    def test_singleton_matches_regime_conditions(self):
        s = spec01(0.25)
        lo, hi = ck_lambda_range(s)
        r = universality_check(s, 0.25, 0.5 * (lo + hi))
        assert r.universal
        assert r.lambda_range == pytest.approx((lo, hi), rel=1e-6)
        assert not universality_check(s, 0.25, 1.1 * hi).universal
        assert not universality_check(s, 0.1, 0.5 * (lo + hi)).delta_ok

    def test_per_channel_pairs_are_forney(self):
        W = CompoundClass.bsc_interval(0.05, 0.1)
        s = spec01(0.43, W)
        r = universality_check(s, 0.43, 3.0, fast=True)
        for ch, (ei, ee) in r.per_channel:
            f = forney_exponents(0.1, 0.43, U2, ch)
            assert (ei, ee) == pytest.approx(f.as_tuple(), abs=1e-9)

    def test_fast_matches_full_grid(self):
        W = CompoundClass.bsc_interval(0.05, 0.1)
        s = spec01(0.43, W)
        a = universality_check(s, 0.43, 3.0, fast=True)
        b = universality_check(s, 0.43, 3.0, fast=False)
        assert a.delta_range == pytest.approx(b.delta_range, abs=1e-10)
        assert a.lambda_range == pytest.approx(b.lambda_range, rel=1e-9)
        assert a.universal == b.universal


class TestForney:
    def test_zero_slack_symmetric(self):
        with pytest.warns(RuntimeWarning):
            f = forney_exponents(0.1, 0.0, U2, bsc(0.1))
        assert f.E_i == pytest.approx(f.E_erase)

    def test_example(self):
        f = forney_exponents(0.1, 0.25, U2, bsc(0.1))
        assert f.as_tuple() == pytest.approx((bsc_esp(0.1, 0.1) + 0.25, bsc_esp(0.35, 0.1)), abs=1e-7)
        assert f.info["in_window"]

    def test_top_of_window(self):
        f = forney_exponents(0.1, C01 - 0.1, U2, bsc(0.1))
        assert f.E_erase == pytest.approx(0.0, abs=1e-12)

    def test_outside_window_flagged(self):
        with pytest.warns(RuntimeWarning):
            f = forney_exponents(0.1, 0.05, U2, bsc(0.1))
        assert not f.info["in_window"]
