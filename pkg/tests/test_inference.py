import math

import numpy as np
import pytest
from scipy import integrate, special

from lcdsc import (
    f_cdf,
    f_test_segment,
    holm_bonferroni,
    holm_thresholds,
    sample_variance,
)


def f_cdf_quadrature(x, df1, df2):
    """Independent oracle: adaptive quadrature of the beta integrand with
    the endpoint singularity folded into the integration weight."""
    a, b = df1 / 2, df2 / 2
    z = df1 * x / (df1 * x + df2)
    ln_beta = special.betaln(a, b)

    def regularized(a_, b_, z_):
        val, _ = integrate.quad(
            lambda t: (1 - t) ** (b_ - 1) / math.exp(ln_beta),
            0,
            z_,
            weight="alg",
            wvar=(a_ - 1, 0),
            limit=200,
        )
        return val

    if z <= 0.5:
        return regularized(a, b, z)
    return 1 - regularized(b, a, 1 - z)


class TestSampleVariance:
    def test_constant(self):
        assert sample_variance([5.0, 5.0, 5.0], 0, 2) == 0.0

    def test_hand_arithmetic(self):
        assert sample_variance([0.0, 2.0], 0, 1) == pytest.approx(1.0)

    def test_monte_carlo(self):
        x = np.random.default_rng(0).normal(0, 3.0, 1000)
        assert abs(sample_variance(x, 0, 999) - 9.0) < 0.9

    def test_empty_segment(self):
        with pytest.raises(ValueError, match="empty"):
            sample_variance([1.0, 2.0], 1, 0)


class TestFCdf:
    def test_symmetry_point(self):
        for d in range(1, 21):
            assert abs(f_cdf(1.0, d, d) - 0.5) < 1e-12

    def test_limits(self):
        assert f_cdf(0.0, 5, 12) == 0.0
        assert f_cdf(float("inf"), 5, 12) == 1.0
        assert f_cdf(1e12, 5, 12) > 1 - 1e-9

    def test_against_quadrature(self):
        got = f_cdf(2.5, 5, 12)
        want = f_cdf_quadrature(2.5, 5, 12)
        assert abs(got - want) < 1e-8

    def test_monotone_in_x(self):
        xs = [0.01, 0.1, 0.3, 0.7, 1.0, 1.5, 3.0, 10.0, 50.0]
        vals = [f_cdf(x, 7, 9) for x in xs]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_reciprocal_symmetry(self):
        for x in (0.2, 0.7, 1.3, 4.0, 11.0):
            for d1, d2 in ((3, 8), (10, 10), (50, 7)):
                assert abs(f_cdf(x, d1, d2) - (1 - f_cdf(1 / x, d2, d1))) < 1e-9

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            f_cdf(1.0, 0, 5)
        with pytest.raises(ValueError):
            f_cdf(-0.5, 5, 5)


class TestFTestSegment:
    def test_null_configuration(self):
        t = f_test_segment((1.0, 100), (1.0, 100), (1.0, 100), 1.0)
        assert t.f_stat == pytest.approx(1.0)
        assert t.p_value == pytest.approx(0.5, abs=0.01)

    def test_hot_segment(self):
        t = f_test_segment((1.0, 100), (100.0, 100), (1.0, 100), 1.0)
        assert t.f_stat == pytest.approx(0.01)
        assert t.p_value < 1e-6
        assert t.p_value == pytest.approx(f_cdf(0.01, 100, 100))

    def test_gamma_gate(self):
        t = f_test_segment((1.0, 100), (100.0, 100), (1.0, 100), 200.0)
        assert t.f_stat == pytest.approx(2.0)
        assert t.p_value > 0.5

    def test_single_neighbor_fallback(self):
        t = f_test_segment(None, (4.0, 50), (2.0, 80), 1.0)
        assert t.s2_before is None
        assert t.f_stat == pytest.approx(0.5)
        assert t.p_value == pytest.approx(f_cdf(0.5, 50, 80))

    def test_reference_is_max_neighbor(self):
        t = f_test_segment((3.0, 30), (6.0, 40), (1.0, 90), 1.0)
        assert t.f_stat == pytest.approx(0.5)
        assert t.n_during == 40
        assert t.p_value == pytest.approx(f_cdf(0.5, 40, 90))

    def test_degenerate_zero_variances(self):
        t = f_test_segment((0.0, 50), (0.0, 50), None, 1.0)
        assert t.p_value == 1.0

    def test_gamma_monotonicity(self):
        ps = [
            f_test_segment((1.0, 60), (5.0, 60), (2.0, 60), g).p_value
            for g in (1.0, 1.5, 2.0, 4.0, 8.0)
        ]
        assert all(b >= a for a, b in zip(ps, ps[1:]))

    def test_preconditions(self):
        with pytest.raises(ValueError, match="neighbor"):
            f_test_segment(None, (1.0, 10), None, 1.0)
        with pytest.raises(ValueError, match="gamma"):
            f_test_segment((1.0, 10), (1.0, 10), None, 0.5)
        with pytest.raises(ValueError):
            f_test_segment((1.0, 10), (1.0, 1), None, 1.0)


class TestHolm:
    def test_both_rejected(self):
        assert holm_bonferroni([0.001, 0.04], 0.05) == [True, True]

    def test_stops_at_first_failure(self):
        assert holm_bonferroni([0.03, 0.04, 0.05], 0.05) == [False, False, False]

    def test_empty(self):
        assert holm_bonferroni([], 0.05) == []

    def test_rejects_prefix_only(self):
        flags = holm_bonferroni([0.2, 0.001, 0.03, 0.011], 0.05)
        assert flags == [False, True, False, True]

    def test_thresholds_follow_ranks(self):
        thresholds = holm_thresholds([0.03, 0.001, 0.02], 0.05)
        assert thresholds == pytest.approx([0.05, 0.05 / 3, 0.025])

    def test_bonferroni_subset(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ps = rng.uniform(0, 0.2, 12).tolist()
            holm = holm_bonferroni(ps, 0.05)
            bonf = [p < 0.05 / len(ps) for p in ps]
            assert all(h or not b for h, b in zip(holm, bonf))

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            holm_bonferroni([0.1], 0.0)
        with pytest.raises(ValueError):
            holm_bonferroni([0.1], 1.0)

    def test_family_wise_error_under_global_null(self):
        # K independent true-null segments per run; the fraction of runs
        # with any rejection stays within Monte Carlo slack of alpha
        rng = np.random.default_rng(99)
        runs = 500
        k = 10
        alpha = 0.05
        n_seg = 50
        false_hits = 0
        for _ in range(runs):
            ps = []
            for _ in range(k):
                during = np.var(rng.normal(0, 1, n_seg))
                before = np.var(rng.normal(0, 1, n_seg))
                after = np.var(rng.normal(0, 1, n_seg))
                test = f_test_segment((before, n_seg), (during, n_seg), (after, n_seg), 1.0)
                ps.append(test.p_value)
            if any(holm_bonferroni(ps, alpha)):
                false_hits += 1
        bound = alpha + 3 * math.sqrt(alpha * (1 - alpha) / runs)
        assert false_hits / runs <= bound
