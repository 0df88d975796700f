"""Estimator arithmetic, truncated-law moments, and density identities."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from failsafe import (
    BelowThresholdError,
    DegenerateVarianceError,
    DomainError,
    InsufficientDataError,
    ParameterTriple,
    ZSample,
    distributional_params,
    invert_nr,
    iyengar_greenhouse_n,
    moments_fixed_exact,
    moments_fixed_largek,
    moments_fixed_table,
    moments_random,
    nr_joint_pdf,
    nr_pdf,
    rosenthal_nr,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    true_nr,
)

Z95 = std_normal_quantile(0.95)
HN = distributional_params("half-normal", 1)


def quad_nr_moments(params, k, alpha=0.05):
    """Quadrature oracle: raw moments of the estimator's density by
    integrating over the underlying truncated sum instead of the closed
    forms under test."""
    za = std_normal_quantile(1.0 - alpha)
    lo = za * math.sqrt(k)
    hi = k * params.mu + 14.0 * math.sqrt(k * params.sigma2)

    def g(sv, power):
        n = sv * sv / za**2 - k
        return n**power * nr_pdf(n, params, k, alpha, "exact") * 2.0 * sv / za**2

    mass, _ = integrate.quad(lambda s: g(s, 0), lo, hi, limit=400)
    m1, _ = integrate.quad(lambda s: g(s, 1), lo, hi, limit=400)
    m2, _ = integrate.quad(lambda s: g(s, 2), lo, hi, limit=400)
    return mass, m1, m2 - m1 * m1


class TestRosenthal:
    def test_all_at_critical_value(self):
        est = rosenthal_nr(ZSample((Z95,) * 10))
        assert est.n_r == pytest.approx(90.0, abs=1e-9)
        assert not est.below_threshold
        assert est.stouffer_z == pytest.approx(Z95 * math.sqrt(10), rel=1e-12)
        assert est.z_alpha == Z95
        assert est.rule_threshold == 60.0
        assert est.rule_exceeded

    def test_single_study_boundary(self):
        est = rosenthal_nr(ZSample((Z95,)))
        assert est.n_r == pytest.approx(0.0, abs=1e-12)
        assert not est.below_threshold

    def test_study1_surrogate(self):
        # z chosen so the 63-study sum inverts the published estimate
        est = rosenthal_nr(ZSample((1.2209871655259548,) * 63))
        assert est.n_r == pytest.approx(2124.0, abs=0.5)

    def test_empty_sample(self):
        with pytest.raises(InsufficientDataError):
            rosenthal_nr(ZSample(()))

    def test_below_threshold_clamps_negative_only(self):
        est = rosenthal_nr(ZSample((0.1,) * 4))
        assert est.n_r == 0.0
        assert est.below_threshold
        # a strongly negative sum squares to a positive raw value, which is
        # kept; only the flag marks the direction problem
        est = rosenthal_nr(ZSample((-3.0,) * 10))
        assert est.below_threshold
        assert est.n_r == pytest.approx(900.0 / Z95**2 - 10.0, rel=1e-12)


class TestInvert:
    def test_zero(self):
        assert invert_nr(0.0, 1, 0.05) == pytest.approx(Z95, rel=1e-12)

    def test_published_study(self):
        assert invert_nr(2124.0, 63, 0.05) == pytest.approx(76.92219142813515,
                                                            rel=1e-12)

    def test_ninety(self):
        assert invert_nr(90.0, 10, 0.05) == pytest.approx(10 * Z95, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            invert_nr(-1.0, 5, 0.05)

    @given(st.floats(0.0, 1e5), st.integers(1, 200),
           st.floats(0.01, 0.49))
    @settings(max_examples=80, deadline=None)
    def test_roundtrip(self, n_r, k, alpha):
        s = invert_nr(n_r, k, alpha)
        est = rosenthal_nr(ZSample((s / k,) * k, alpha))
        # the flag can fire one ulp below the threshold when n_r is 0
        if not est.below_threshold:
            assert est.n_r == pytest.approx(n_r, rel=1e-9, abs=1e-9)
        else:
            assert n_r == pytest.approx(0.0, abs=1e-6)

    def test_alpha_half_rejected(self):
        with pytest.raises(DomainError):
            rosenthal_nr(ZSample((1.0, 2.0), alpha=0.5))
        with pytest.raises(DomainError):
            invert_nr(1.0, 2, 0.5)

    @given(st.lists(st.floats(0.5, 4.0), min_size=2, max_size=30),
           st.floats(0.01, 0.2), st.floats(0.21, 0.49))
    @settings(max_examples=60, deadline=None)
    def test_scale_coherence(self, zs, a1, a2):
        e1 = rosenthal_nr(ZSample(tuple(zs), a1))
        e2 = rosenthal_nr(ZSample(tuple(zs), a2))
        if e1.below_threshold or e2.below_threshold:
            return  # identity concerns the unclamped formula only
        lhs = (e1.n_r + e1.k) / (e2.n_r + e2.k)
        rhs = e2.z_alpha**2 / e1.z_alpha**2
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestIyengarGreenhouse:
    def test_boundary_is_zero(self):
        k = 4
        est = iyengar_greenhouse_n(ZSample((Z95 * math.sqrt(k) / k,) * k))
        assert est == pytest.approx(0.0, abs=1e-7)

    def test_against_brentq_oracle(self):
        sample = ZSample((2.0,) * 10)     # sum 20, k 10
        m_alpha = -std_normal_pdf(Z95) / std_normal_cdf(Z95)
        assert m_alpha == pytest.approx(-0.108564, abs=1e-6)
        oracle = optimize.brentq(
            lambda n: Z95 * math.sqrt(n + 10) - 20.0 - n * m_alpha,
            0.0, 200.0, xtol=1e-12)
        got = iyengar_greenhouse_n(sample)
        assert got == pytest.approx(oracle, abs=2e-8)
        assert got == pytest.approx(58.66, abs=0.05)

    def test_below_threshold(self):
        with pytest.raises(BelowThresholdError):
            iyengar_greenhouse_n(ZSample((0.1, 0.1)))

    def test_never_exceeds_rosenthal(self):
        g = np.random.default_rng(5150)
        for _ in range(100):
            k = int(g.integers(2, 60))
            z = np.abs(g.normal(1.0, 0.7, k))
            sample = ZSample(tuple(z))
            est = rosenthal_nr(sample)
            if est.below_threshold:
                continue
            assert iyengar_greenhouse_n(sample) <= est.n_r + 1e-6


class TestFixedMoments:
    def test_exact_matches_quadrature_reference_point(self):
        params = ParameterTriple(0.8, 0.36, 10.0, "mom")
        rep = moments_fixed_exact(params, 10, 0.05)
        mass, qm, qv = quad_nr_moments(params, 10)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert rep.expectation == pytest.approx(qm, rel=1e-6)
        assert rep.variance == pytest.approx(qv, rel=1e-6)

    def test_exact_small_k_half_normal(self):
        # frozen from the quadrature oracle; the printed small-sample
        # correction with other k powers does not integrate consistently
        rep = moments_fixed_exact(HN, 1, 0.05)
        assert rep.lambda_star == pytest.approx(-1.405, abs=1e-3)
        mass, qm, qv = quad_nr_moments(HN, 1)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert rep.expectation == pytest.approx(qm, rel=1e-9)
        assert rep.variance == pytest.approx(qv, rel=1e-9)
        assert rep.variance == pytest.approx(0.13757008249309563, rel=1e-9)

    def test_exact_large_k_negligible_correction(self):
        rep = moments_fixed_exact(HN, 50, 0.05)
        ref = moments_fixed_largek(HN, 50, 0.05)
        assert rep.lambda_star == pytest.approx(6.63, abs=0.01)
        assert abs(rep.delta_star) < 1e-4
        assert abs(rep.variance - ref.variance) < 1.0
        assert ref.variance == pytest.approx(15891.843578162607, rel=1e-9)

    def test_largek_values(self):
        std = distributional_params("std-normal", 63)
        assert moments_fixed_largek(std, 63, 0.05).variance == pytest.approx(
            1084.4, abs=0.1)
        assert moments_fixed_largek(HN, 5, 0.05).expectation == pytest.approx(
            1.554, abs=0.001)
        one = ParameterTriple(0.0, 1.0, 1.0, "mom")
        assert moments_fixed_largek(one, 1, 0.05).expectation == pytest.approx(
            -0.6304, abs=1e-4)

    def test_degenerate_sigma(self):
        flat = ParameterTriple(1.0, 0.0, 5.0, "mom")
        for fn in (moments_fixed_exact, moments_fixed_largek,
                   moments_fixed_table):
            with pytest.raises(DegenerateVarianceError):
                fn(flat, 5, 0.05)

    def test_exact_converges_to_largek(self):
        diffs_e, diffs_v = [], []
        for k in (5, 25, 100):
            e = moments_fixed_exact(HN, k, 0.05)
            l = moments_fixed_largek(HN, k, 0.05)
            diffs_e.append(abs(e.expectation - l.expectation))
            diffs_v.append(abs(e.variance - l.variance))
        assert diffs_e[0] > diffs_e[1] > diffs_e[2]
        assert diffs_v[0] > diffs_v[1] > diffs_v[2]

    def test_largek_equals_exact_at_extreme_lambda_star(self):
        e = moments_fixed_exact(HN, 50, 0.05)
        l = moments_fixed_largek(HN, 50, 0.05)
        assert e.expectation == pytest.approx(l.expectation, rel=1e-6)
        assert e.variance == pytest.approx(l.variance, rel=1e-6)

    def test_variance_nonnegative_on_grid(self):
        for k in (1, 2, 5, 10, 20, 60):
            for mu in (0.0, 0.2, 0.8, 1.5):
                for s2 in (0.1, 0.36, 1.0, 2.0):
                    p = ParameterTriple(mu, s2, float(k), "mom")
                    assert moments_fixed_exact(p, k, 0.05).variance > -1e-9

    def test_monte_carlo_truncated_pipeline(self):
        # independent sampler: scipy truncnorm for the sum, then the
        # quadratic map to the estimator
        for k in (1, 10, 50):
            rep = moments_fixed_exact(HN, k, 0.05)
            m, s = k * HN.mu, math.sqrt(k * HN.sigma2)
            a = (Z95 * math.sqrt(k) - m) / s
            sv = stats.truncnorm.rvs(a, np.inf, loc=m, scale=s, size=10**6,
                                     random_state=np.random.default_rng(k))
            n = sv * sv / Z95**2 - k
            se_mean = n.std(ddof=1) / 1e3
            assert n.mean() == pytest.approx(rep.expectation, abs=3 * se_mean)
            c = n - n.mean()
            se_var = math.sqrt((np.mean(c**4) - n.var() ** 2) / len(n))
            assert n.var(ddof=1) == pytest.approx(rep.variance, abs=3 * se_var)


class TestTableVariantMoments:
    def test_matches_exact_at_k_one(self):
        # the two corrections coincide when every k power is 1
        t = moments_fixed_table(HN, 1, 0.05)
        assert t.variance == pytest.approx(1.6783143357519135, rel=1e-9)

    def test_collapses_to_largek(self):
        t = moments_fixed_table(HN, 100, 0.05)
        l = moments_fixed_largek(HN, 100, 0.05)
        assert t.variance == pytest.approx(l.variance, rel=1e-6)


class TestRandomMoments:
    def test_std_normal_lambda_148(self):
        p = ParameterTriple(0.0, 1.0, 148.0, "std-normal")
        assert moments_random(p, 0.05).variance == pytest.approx(6084.0, abs=1.0)

    def test_half_normal_lambda_5(self):
        p = ParameterTriple(HN.mu, HN.sigma2, 5.0, "half-normal")
        assert moments_random(p, 0.05).expectation == pytest.approx(2.731,
                                                                    abs=0.001)

    def test_compound_poisson_normal_increments(self):
        # the closed form rests on the normal approximation of the sum given
        # the count, so the validating simulation draws the sum from that law
        lam = 15.0
        p = ParameterTriple(HN.mu, HN.sigma2, lam, "half-normal")
        rep = moments_random(p, 0.05)
        g = np.random.default_rng(303)
        ks = g.poisson(lam, 2 * 10**5).astype(float)
        sums = ks * p.mu + np.sqrt(ks * p.sigma2) * g.standard_normal(len(ks))
        n = sums * sums / Z95**2 - ks
        se_mean = n.std(ddof=1) / math.sqrt(len(n))
        assert n.mean() == pytest.approx(rep.expectation, abs=4 * se_mean)
        c = n - n.mean()
        se_var = math.sqrt((np.mean(c**4) - n.var() ** 2) / len(n))
        assert n.var(ddof=1) == pytest.approx(rep.variance, abs=4 * se_var)

    def test_compound_poisson_exact_increments(self):
        # with true half-normal increments the mean formula is exact while
        # the variance exceeds the closed form by the fourth-moment term the
        # normal approximation drops: [lam(m4 - 3 s^4) + 4 mu m3 (lam+lam^2)]/Z^4
        lam = 15.0
        p = ParameterTriple(HN.mu, HN.sigma2, lam, "half-normal")
        rep = moments_random(p, 0.05)
        s2 = p.sigma2
        m3 = (math.sqrt(2.0) * (4.0 - math.pi) / (math.pi - 2.0) ** 1.5) * s2**1.5
        m4 = (3.0 + 8.0 * (math.pi - 3.0) / (math.pi - 2.0) ** 2) * s2**2
        bias = (lam * (m4 - 3.0 * s2 * s2)
                + 4.0 * p.mu * m3 * (lam + lam * lam)) / Z95**4
        g = np.random.default_rng(304)
        ks = g.poisson(lam, 2 * 10**5)
        draws = np.abs(g.standard_normal(int(ks.sum())))
        sums = np.zeros(len(ks))
        nz = ks > 0
        starts = np.cumsum(ks) - ks
        sums[nz] = np.add.reduceat(draws, starts[nz])
        n = sums * sums / Z95**2 - ks
        se_mean = n.std(ddof=1) / math.sqrt(len(n))
        assert n.mean() == pytest.approx(rep.expectation, abs=4 * se_mean)
        c = n - n.mean()
        se_var = math.sqrt((np.mean(c**4) - n.var() ** 2) / len(n))
        assert n.var(ddof=1) == pytest.approx(rep.variance + bias,
                                              abs=4 * se_var)

    def test_lambda_validation(self):
        with pytest.raises(DomainError):
            ParameterTriple(0.0, 1.0, 0.0, "mom")


class TestTrueValue:
    def test_fixed_half_normal(self):
        assert true_nr(HN, "fixed", 0.05, k=5) == pytest.approx(
            1.5540974477825866, rel=1e-12)

    def test_fixed_std_normal_any_k(self):
        std = distributional_params("std-normal", 7)
        assert true_nr(std, "fixed", 0.05, k=7) == pytest.approx(
            7.0 / Z95**2 - 7.0, rel=1e-12)

    def test_random_half_normal(self):
        p = ParameterTriple(HN.mu, HN.sigma2, 5.0, "half-normal")
        assert true_nr(p, "random", 0.05) == pytest.approx(
            2.730607422892988, rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            true_nr(HN, "fixed", 0.05)
        with pytest.raises(DomainError):
            true_nr(HN, "both", 0.05, k=3)


class TestDensity:
    def test_normalizes(self):
        params = ParameterTriple(0.8, 0.36, 10.0, "mom")
        mass, _, _ = quad_nr_moments(params, 10)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_exact_largek_ratio(self):
        lam_star = moments_fixed_exact(HN, 5, 0.05).lambda_star
        factor = 1.0 / std_normal_cdf(lam_star)
        for n_r in (0.0, 1.0, 4.0, 12.0):
            exact = nr_pdf(n_r, HN, 5, 0.05, "exact")
            approx = nr_pdf(n_r, HN, 5, 0.05, "largek")
            assert exact == pytest.approx(approx * factor, rel=1e-12)

    def test_zero_below_support(self):
        assert nr_pdf(-0.5, HN, 5, 0.05) == 0.0

    def test_change_of_variables_oracle(self):
        # independent evaluation: scipy truncated-normal density times the
        # jacobian of the quadratic map
        params = ParameterTriple(0.8, 0.36, 10.0, "mom")
        k = 10
        rep = moments_fixed_exact(params, k, 0.05)
        n_r = rep.expectation
        m, s = k * params.mu, math.sqrt(k * params.sigma2)
        a = (Z95 * math.sqrt(k) - m) / s
        sv = Z95 * math.sqrt(n_r + k)
        oracle = stats.truncnorm.pdf(sv, a, np.inf, loc=m, scale=s) \
            * Z95 / (2.0 * math.sqrt(n_r + k))
        assert nr_pdf(n_r, params, k, 0.05, "exact") == pytest.approx(
            oracle, rel=1e-10)

    def test_variant_validation(self):
        with pytest.raises(DomainError):
            nr_pdf(1.0, HN, 5, 0.05, "huge-k")


class TestJointDensity:
    def test_factorizes(self):
        p = ParameterTriple(HN.mu, HN.sigma2, 5.0, "half-normal")
        pmf = math.exp(5 * math.log(5.0) - 5.0 - math.lgamma(6.0))
        expected = nr_pdf(2.0, p, 5, 0.05, "exact") * pmf
        assert nr_joint_pdf(2.0, 5, p, 0.05) == pytest.approx(expected,
                                                              abs=1e-14)

    def test_total_mass_excludes_zero_count(self):
        lam = 5.0
        p = ParameterTriple(HN.mu, HN.sigma2, lam, "half-normal")
        total = 0.0
        for k in range(1, 41):
            hi = k * p.mu + 14.0 * math.sqrt(k * p.sigma2)
            lo = Z95 * math.sqrt(k)

            def g(sv, kk=k):
                n = sv * sv / Z95**2 - kk
                return nr_joint_pdf(n, kk, p, 0.05) * 2.0 * sv / Z95**2

            mass, _ = integrate.quad(g, lo, hi, limit=300)
            total += mass
        assert total == pytest.approx(1.0 - math.exp(-lam), abs=1e-6)

    def test_nonnegative_on_grid(self):
        p = ParameterTriple(HN.mu, HN.sigma2, 7.0, "half-normal")
        g = np.random.default_rng(11)
        for _ in range(50):
            n_r = float(g.uniform(0, 50))
            k = int(g.integers(1, 30))
            assert nr_joint_pdf(n_r, k, p, 0.05) >= 0.0

    def test_zero_count_rejected(self):
        p = ParameterTriple(HN.mu, HN.sigma2, 5.0, "half-normal")
        with pytest.raises(DomainError):
            nr_joint_pdf(1.0, 0, p, 0.05)
