import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmmi.bsc import (
    BscParams,
    capacity,
    conjugate_bsc,
    esp_bsc,
    esp_prime_bsc,
    h2,
    h2_inv,
    mu_R,
    rcr_bsc,
    rho_R,
    universality_region_bsc,
)
from fmmi.exponents import CompoundClass, conjugate_rate, esp, esp_compound
from fmmi.probkit import bsc
from fmmi.weighting import ProblemSpec, universality_check

from oracles import bsc_esp

U2 = np.array([0.5, 0.5])


class TestEntropy:
    def test_values(self):
        assert h2(0.5) == 1.0
        assert h2_inv(1.0) == 0.5
        assert h2(0.1) == pytest.approx(0.4690, abs=5e-5)
        assert rho_R(0.1) == pytest.approx(0.3160, abs=5e-5)
        # 2.1644 from the unrounded rho_R; rounding rho_R to 0.3160 first gives 2.1646
        assert mu_R(0.1) == pytest.approx(1 / rho_R(0.1) - 1, abs=1e-15)
        assert mu_R(0.1) == pytest.approx(2.1644, abs=5e-5)

    @given(st.floats(0.0, 0.5))
    def test_inverse_roundtrip(self, x):
        assert h2_inv(h2(x)) == pytest.approx(x, abs=1e-9)

    def test_mu_R_increases_from_one(self):
        m = [mu_R(r) for r in np.linspace(0, 0.99, 60)]
        assert m[0] == pytest.approx(1.0)
        assert np.all(np.diff(m) > 0)
        assert mu_R(1.0) == math.inf

    def test_errors(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                h2(bad)
            with pytest.raises(ValueError):
                h2_inv(bad)
            with pytest.raises(ValueError):
                rho_R(bad)
        with pytest.raises(ValueError):
            BscParams(0.6)

    def test_params(self):
        assert BscParams(0.5).mu == 1.0
        assert BscParams(0.5).capacity == 0.0
        assert BscParams(0.1).mu == pytest.approx(9.0)


class TestExponent:
    def test_values(self):
        assert esp_bsc(0.0, 0.1) == pytest.approx(-math.log2(math.sqrt(4 * 0.09)), abs=1e-12)
        assert esp_bsc(0.0, 0.1) == pytest.approx(0.7370, abs=5e-5)
        assert esp_bsc(capacity(0.1), 0.1) == 0.0
        assert esp_bsc(0.9, 0.1) == 0.0

    @pytest.mark.parametrize("rho", [0.05, 0.1, 0.2])
    def test_matches_generic(self, rho):
        R = np.linspace(0, capacity(rho), 52)[1:-1]
        ref = np.array([esp_bsc(r, rho) for r in R])
        assert np.max(np.abs(esp(R, U2, bsc(rho)) - ref)) <= 1e-6
        assert ref == pytest.approx([bsc_esp(r, rho) for r in R], abs=1e-10)

    def test_slope_matches_differences(self):
        # h2_inv is accurate to 1e-12, so a smaller step drowns in its error
        h = 1e-5
        for r in np.linspace(0.02, capacity(0.1) - 0.02, 15):
            fd = (esp_bsc(r + h, 0.1) - esp_bsc(r - h, 0.1)) / (2 * h)
            assert esp_prime_bsc(r, 0.1) == pytest.approx(fd, abs=1e-6)
        assert esp_prime_bsc(0.0, 0.1) == -math.inf

    def test_critical_rate(self):
        assert rcr_bsc(0.1) == pytest.approx(1 - h2(0.25), abs=1e-12)
        assert rcr_bsc(0.1) == pytest.approx(0.1887, abs=5e-5)
        assert esp_prime_bsc(rcr_bsc(0.1), 0.1) == pytest.approx(-1.0, abs=1e-9)

    def test_compound_minimum_at_noisiest(self):
        rhos = np.linspace(0.05, 0.1, 41)
        for r in (0.05, 0.2, 0.4):
            vals = [esp_bsc(r, x) for x in rhos]
            assert int(np.argmin(vals)) == len(rhos) - 1
            W = CompoundClass.bsc_interval(0.05, 0.1)
            assert esp_compound(r, U2, W) == pytest.approx(min(vals), abs=1e-8)

    def test_cleanest_has_steepest_slope(self):
        for r in (0.05, 0.2, 0.4):
            s = [esp_prime_bsc(r, x) for x in np.linspace(0.05, 0.1, 11)]
            assert int(np.argmin(s)) == 0
            assert s[0] < s[-1]


class TestConjugate:
    def test_self_conjugate_at_critical_rate(self):
        r = rcr_bsc(0.1)
        assert conjugate_bsc(r, 0.1) == pytest.approx(r, abs=1e-9)

    def test_example(self):
        mu_c = 9 / mu_R(0.1)
        assert conjugate_bsc(0.1, 0.1) == pytest.approx(1 - h2(1 / (1 + mu_c)), abs=1e-12)
        assert conjugate_bsc(0.1, 0.1) == pytest.approx(0.2905, abs=1e-4)

    def test_matches_generic(self):
        for r in np.linspace(0.01, rcr_bsc(0.1), 20):
            assert conjugate_bsc(r, 0.1) == pytest.approx(conjugate_rate(r, U2, bsc(0.1)), abs=1e-6)

    def test_involution_and_slope_product(self):
        for r in np.linspace(0.01, 0.3, 12):
            c = conjugate_bsc(r, 0.1)
            assert conjugate_bsc(c, 0.1) == pytest.approx(r, abs=1e-9)
            assert esp_prime_bsc(r, 0.1) * esp_prime_bsc(c, 0.1) == pytest.approx(1.0, abs=1e-9)

    def test_near_capacity_conjugate_goes_to_zero(self):
        assert conjugate_bsc(capacity(0.1) - 1e-9, 0.1) == pytest.approx(0.0, abs=1e-3)
        with pytest.raises(ValueError):
            conjugate_bsc(0.6, 0.1)


class TestUniversalityRegion:
    def test_singleton_matches_conjugate(self):
        u = universality_region_bsc(0.1, 0.1, 0.1)
        assert u.delta_range[0] == pytest.approx(conjugate_bsc(0.1, 0.1) - 0.1, abs=1e-12)
        assert u.delta_range[1] == pytest.approx(capacity(0.1) - 0.1, abs=1e-12)

    def test_left_end_zero(self):
        # mu_max <= mu_R^2
        R = 0.3
        rho_min = 1 / (1 + mu_R(R) ** 2) + 1e-3
        u = universality_region_bsc(R, rho_min, 0.1)
        assert u.mu_max <= mu_R(R) ** 2
        assert u.delta_range[0] == 0.0
        assert u.nonempty

    def test_agrees_with_generic_check(self):
        u = universality_region_bsc(0.1, 0.05, 0.1)
        W = CompoundClass.bsc_interval(0.05, 0.1)
        for d in (0.425, 0.43):
            s = ProblemSpec.from_delta(0.1, U2, W, d)
            rep = universality_check(s, d, 2.0)
            assert rep.delta_range == pytest.approx(u.delta_range, abs=1e-6)
            lr = u.lambda_range(d)
            assert (lr is not None) == (rep.lambda_range[0] <= rep.lambda_range[1] * (1 + 1e-9))
            if lr is not None:
                assert lr == pytest.approx(rep.lambda_range, rel=1e-6)

    def test_gate_iff_lambda_nonempty(self):
        u = universality_region_bsc(0.1, 0.05, 0.1)
        for d in np.linspace(0.0, capacity(0.1) - 0.1, 30):
            assert (u.lambda_range(d) is not None) == u.gate(d)

    def test_equality_gives_single_lambda(self):
        R, d = 0.1, 0.3
        mu_max = mu_R(R) * mu_R(R + d)
        u = universality_region_bsc(R, 1 / (1 + mu_max), 0.1)
        lo, hi = u.lambda_range(d)
        assert lo == pytest.approx(hi, rel=1e-9)
        assert lo == pytest.approx(u.lambda_opt(d), rel=1e-9)
        assert u.lambda_opt(d) >= 1

    def test_errors(self):
        with pytest.raises(ValueError):
            universality_region_bsc(0.1, 0.2, 0.1)
        with pytest.raises(ValueError):
            universality_region_bsc(0.6, 0.05, 0.1)
