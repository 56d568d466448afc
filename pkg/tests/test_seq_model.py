"""Tests for the conjugate sequence model against independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contraq.seq_model import (
    FSPACE,
    KFSPACE,
    MILD,
    SEVERE,
    CoefficientSequence,
    DivergentNorm,
    GaussianProductPrior,
    IllPosedSpec,
    SequenceObservation,
    Tail,
    apply_operator,
    credible_radius,
    expected_risk_components,
    kappa,
    kf_sq_tail,
    kl_divergence,
    l2_dist,
    make_truth,
    observe,
    posterior,
    posterior_draw_distances,
    posterior_risk_direct,
    sobolev_norm,
)


def quadrature_bayes(lam, kap, n, y):
    """1-d Bayes update for g = kappa*f with prior N(0, lam*kap^2) and
    likelihood y | g ~ N(g, 1/n), integrated on a fine grid.

    Independent of the closed-form posterior: locates the mass by scanning
    the unnormalised log density, then integrates with Simpson's rule.
    """
    prior_var = lam * kap**2
    noise_var = 1.0 / n

    def log_dens(g):
        return -0.5 * g**2 / prior_var - 0.5 * (y - g) ** 2 / noise_var

    scale = np.sqrt(min(prior_var, noise_var))
    coarse = np.linspace(min(0.0, y) - 12 * np.sqrt(max(prior_var, noise_var)),
                         max(0.0, y) + 12 * np.sqrt(max(prior_var, noise_var)), 20001)
    center = coarse[np.argmax(log_dens(coarse))]
    g = np.linspace(center - 12 * scale, center + 12 * scale, 16001)
    w = np.exp(log_dens(g) - np.max(log_dens(g)))
    z = np.trapezoid(w, g)
    mean = np.trapezoid(g * w, g) / z
    var = np.trapezoid((g - mean) ** 2 * w, g) / z
    return mean, var


class TestKappa:
    def test_mild_formula(self):
        assert kappa(IllPosedSpec(MILD, p=1.0, C=1.0), 4) == pytest.approx(0.25, abs=0)

    def test_p_zero_disables_illposedness(self):
        assert kappa(IllPosedSpec(MILD, p=0.0, C=1.0), 917) == 1.0

    def test_severe_formula(self):
        got = kappa(IllPosedSpec(SEVERE, p=1.0, gamma=1.0), 3)
        assert got == pytest.approx(np.exp(-3.0), rel=1e-15)

    def test_strictly_decreasing(self):
        i = np.arange(1, 200)
        for spec in (IllPosedSpec(MILD, p=1.5, C=2.0), IllPosedSpec(SEVERE, p=1.2, gamma=0.7)):
            k = kappa(spec, i)
            assert np.all(np.diff(k) < 0)


class TestSobolevNorm:
    def test_unit_spike(self):
        f = CoefficientSequence(np.array([1.0, 0.0, 0.0]))
        assert sobolev_norm(f, 3.7) == 1.0

    def test_two_coordinate_arithmetic(self):
        f = CoefficientSequence(np.array([1.0, 0.5]))
        assert sobolev_norm(f, 1.0) == pytest.approx(np.sqrt(2.0), rel=1e-15)

    def test_power_tail_vs_bruteforce(self):
        # brute-force oracle: 1e6-term partial sum plus integral remainder
        # bracket (the raw partial sum alone misses ~2.5 at this exponent)
        N = 64
        expo = 1.55
        f = CoefficientSequence(np.arange(1, N + 1, dtype=float) ** (-expo), Tail.power(1.0, expo))
        s = 2 * expo - 2  # weighted tail exponent, barely summable
        M = 10**6
        i = np.arange(1, M + 1, dtype=float)
        partial = np.sum(i ** (-2 * expo) * i**2)
        rem_lo = (M + 1) ** (1 - s) / (s - 1)  # integral bounds on sum_{i>M} i^-s
        rem_hi = M ** (1 - s) / (s - 1)
        got_sq = sobolev_norm(f, 1.0) ** 2
        assert partial + rem_lo <= got_sq <= partial + rem_hi
        midpoint = partial + 0.5 * (rem_lo + rem_hi)
        assert got_sq == pytest.approx(midpoint, abs=1e-6)

    def test_divergent_tail_raises(self):
        f = CoefficientSequence(np.ones(4), Tail.power(1.0, 1.2))
        with pytest.raises(DivergentNorm):
            sobolev_norm(f, 1.0)


class TestMakeTruth:
    def test_norm_is_radius(self):
        f0 = make_truth(beta=1.0, radius=1.0, eta=0.05, N=10**4)
        assert sobolev_norm(f0, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_zero_radius(self):
        f0 = make_truth(beta=1.0, radius=0.0, eta=0.05, N=100)
        assert np.all(f0.coeffs == 0.0)
        assert f0.l2_norm() == 0.0

    def test_lower_smoothness_norm_vs_bruteforce(self):
        f0 = make_truth(beta=2.0, radius=3.0, eta=0.05, N=10**4)
        i = np.arange(1, 10**6 + 1, dtype=float)
        vals = np.concatenate([f0.coeffs, f0.tail_values(10**4 + 1, 10**6)])
        brute = np.sqrt(np.sum(vals**2 * i**2))
        assert sobolev_norm(f0, 1.0) == pytest.approx(brute, abs=1e-6)


class TestObserve:
    def test_noiseless_limit(self):
        # with the noise stream contribution removed, y = kappa * f0 exactly
        f0 = make_truth(1.0, 1.0, N=64)
        spec = IllPosedSpec(MILD, p=1.0)
        obs = observe(f0, spec, n=10, N=64, seed=7)
        noise = obs.y - apply_operator(f0, spec, 64)
        rebuilt = apply_operator(f0, spec, 64) + noise
        np.testing.assert_allclose(rebuilt, obs.y, rtol=0, atol=0)
        zero_noise = apply_operator(f0, spec, 64)
        np.testing.assert_allclose(zero_noise, kappa(spec, np.arange(1, 65)) * f0.coeffs)

    def test_zero_truth_clt_band(self):
        f0 = make_truth(1.0, 0.0, N=4)
        spec = IllPosedSpec(MILD, p=1.0)
        n = 16
        reps = 10**5
        first = np.empty(reps)
        for r in range(reps):
            first[r] = observe(f0, spec, n=n, N=4, seed=11, replication=r).y[0]
        band = 4.0 / np.sqrt(reps) / np.sqrt(n)
        assert abs(first.mean()) <= band

    def test_seed_determinism(self):
        f0 = make_truth(1.0, 1.0, N=128)
        spec = IllPosedSpec(MILD, p=1.0)
        a = observe(f0, spec, 100, 128, seed=42, replication=3)
        b = observe(f0, spec, 100, 128, seed=42, replication=3)
        np.testing.assert_array_equal(a.y, b.y)
        c = observe(f0, spec, 100, 128, seed=42, replication=4)
        assert not np.array_equal(a.y, c.y)


class TestPosterior:
    def test_unit_case(self):
        # lambda = 1, kappa = 1, n = 1, y = 2  ->  mean 1, var 1/2
        prior = GaussianProductPrior(MILD, alpha=0.0, scale=1.0)
        obs = SequenceObservation(np.array([2.0]), n=1, seed=0)
        post = posterior(prior, obs, IllPosedSpec(MILD, p=0.0), KFSPACE)
        assert post.mean[0] == pytest.approx(1.0)
        assert post.var[0] == pytest.approx(0.5)

    def test_truncated_coordinates_are_degenerate(self):
        prior = GaussianProductPrior(SEVERE, alpha=1.0, xi=0.5, truncation=3)
        obs = SequenceObservation(np.ones(8), n=50, seed=0)
        post = posterior(prior, obs, IllPosedSpec(SEVERE, gamma=1.0), KFSPACE)
        assert np.all(post.mean[3:] == 0.0)
        assert np.all(post.var[3:] == 0.0)
        post_f = posterior(prior, obs, IllPosedSpec(SEVERE, gamma=1.0), FSPACE)
        assert np.all(post_f.mean[3:] == 0.0)
        assert np.all(post_f.var[3:] == 0.0)

    def test_conjugacy_against_quadrature(self):
        # 1e3 random coordinates vs the 1-d quadrature Bayes oracle, driven
        # through the production posterior() at coordinate 1 of a severe spec
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            lam = float(rng.uniform(0.05, 5.0))
            kap = float(rng.uniform(0.05, 0.99))
            n = int(rng.integers(1, 10**4))
            y = float(rng.normal(scale=2.0))
            prior = GaussianProductPrior(SEVERE, alpha=0.0, xi=0.0, scale=lam)
            spec = IllPosedSpec(SEVERE, p=1.0, gamma=-np.log(kap))
            obs = SequenceObservation(np.array([y]), n=n, seed=0)
            post = posterior(prior, obs, spec, KFSPACE)
            mean_q, var_q = quadrature_bayes(lam, kap, n, y)
            worst = max(worst, abs(mean_q - post.mean[0]), abs(var_q - post.var[0]))
        assert worst <= 1e-8

    def test_shrinkage(self):
        prior = GaussianProductPrior(MILD, alpha=1.0)
        spec = IllPosedSpec(MILD, p=1.0)
        obs = observe(make_truth(1.0, 1.0, N=256), spec, 1000, 256, seed=5)
        post = posterior(prior, obs, spec, KFSPACE)
        prior_var_kf = prior.variances(256) * kappa(spec, np.arange(1, 257)) ** 2
        assert np.all(post.var < prior_var_kf)


class TestPosteriorRisk:
    def _setup(self, n=200, k=6, seed=3):
        spec = IllPosedSpec(SEVERE, p=1.0, gamma=0.5)
        prior = GaussianProductPrior(SEVERE, alpha=1.0, xi=0.2, truncation=k)
        f0 = make_truth(1.0, 1.0, N=256)
        obs = observe(f0, spec, n, 256, seed=seed)
        return spec, prior, f0, obs

    def test_zero_truth_zero_data_risk_is_variance_sum(self):
        spec, prior, _, _ = self._setup()
        f0 = make_truth(1.0, 0.0, N=256)
        obs = SequenceObservation(np.zeros(256), n=200, seed=0)
        post = posterior(prior, obs, spec, KFSPACE)
        assert posterior_risk_direct(post, f0, spec) == pytest.approx(float(np.sum(post.var)))

    def test_huge_prior_variance_noiseless_limit(self):
        # lambda -> infinity coordinatewise: risk -> pure truncation bias
        spec = IllPosedSpec(SEVERE, p=1.0, gamma=0.5)
        k = 6
        prior = GaussianProductPrior(SEVERE, alpha=0.0, xi=0.0, truncation=k, scale=1e14)
        f0 = make_truth(1.0, 1.0, N=256)
        kf0 = apply_operator(f0, spec, 256)
        obs = SequenceObservation(kf0, n=10**12, seed=0)
        post = posterior(prior, obs, spec, KFSPACE)
        risk = posterior_risk_direct(post, f0, spec)
        pure_bias = kf_sq_tail(f0, spec, k)
        assert risk == pytest.approx(pure_bias, rel=1e-4)

    def test_matches_monte_carlo(self):
        spec, prior, f0, obs = self._setup()
        post = posterior(prior, obs, spec, KFSPACE)
        closed = posterior_risk_direct(post, f0, spec)
        d = posterior_draw_distances(post, f0, spec, draws=10**5, seed=99)
        mc = float(np.mean(d**2))
        se = float(np.std(d**2, ddof=1) / np.sqrt(d.size))
        assert abs(closed - mc) <= 4.0 * se


class TestRiskComponents:
    def test_formulas_at_balance_point(self):
        # at a coordinate where n lambda kappa^2 = 1: s = lk2/2, t = lk2/4
        lk2 = 1.0 / 123.0
        n = 123
        spec = IllPosedSpec(MILD, p=0.0, C=1.0)  # kappa = 1
        prior = GaussianProductPrior(MILD, alpha=0.0, scale=lk2, truncation=1)
        f0 = make_truth(1.0, 0.0, N=4)
        _, s_sum, t_sum = expected_risk_components(prior, f0, spec, n)
        assert s_sum == pytest.approx(lk2 / 2.0, rel=1e-14)
        assert t_sum == pytest.approx(lk2 / 4.0, rel=1e-14)

    def test_sums_bounded_by_k_over_n(self):
        spec = IllPosedSpec(SEVERE, p=1.0, gamma=1.0)
        f0 = make_truth(1.0, 1.0, N=64)
        for n in (10, 10**3, 10**6):
            prior = GaussianProductPrior(SEVERE, alpha=1.0, xi=0.0, truncation=8)
            _, s_sum, t_sum = expected_risk_components(prior, f0, spec, n)
            assert s_sum <= 8.0 / n
            assert t_sum <= 8.0 / n

    def test_bias_vs_bruteforce(self):
        spec = IllPosedSpec(SEVERE, p=1.0, gamma=0.5)
        prior = GaussianProductPrior(SEVERE, alpha=1.0, xi=0.2, truncation=7)
        f0 = make_truth(1.0, 1.0, N=2**14)
        n = 500
        bias, _, _ = expected_risk_components(prior, f0, spec, n)
        i = np.arange(1, 10**6 + 1, dtype=float)
        vals = np.concatenate([f0.coeffs, f0.tail_values(2**14 + 1, 10**6)])
        kap = np.exp(-0.5 * i)
        lam = np.zeros_like(i)
        lam[:7] = i[:7] ** (-1.0) * np.exp(-0.2 * i[:7])
        brute = np.sum(kap**2 * vals**2 / (1.0 + n * lam * kap**2) ** 2)
        assert bias == pytest.approx(brute, rel=1e-10)


class TestCredibleRadius:
    def _post(self):
        mean = np.array([0.3, -0.2])
        var = np.array([0.04, 0.09])
        from contraq.seq_model import DiagonalGaussianPosterior

        return DiagonalGaussianPosterior(mean, var, FSPACE)

    def test_level_zero_is_min(self):
        post = self._post()
        f0 = CoefficientSequence(np.zeros(2))
        spec = IllPosedSpec(MILD, p=1.0)
        d = posterior_draw_distances(post, f0, spec, 500, seed=1)
        assert credible_radius(post, f0, spec, 0.0, 500, seed=1) == pytest.approx(float(d.min()))

    def test_point_mass_posterior(self):
        from contraq.seq_model import DiagonalGaussianPosterior

        post = DiagonalGaussianPosterior(np.array([0.6, 0.8]), np.zeros(2), FSPACE)
        f0 = CoefficientSequence(np.zeros(2))
        spec = IllPosedSpec(MILD, p=1.0)
        for level in (0.0, 0.4, 0.9):
            assert credible_radius(post, f0, spec, level, 200, seed=2) == pytest.approx(1.0)

    def test_quantile_vs_oversampled_oracle(self):
        post = self._post()
        f0 = CoefficientSequence(np.array([0.1, 0.1]))
        spec = IllPosedSpec(MILD, p=1.0)
        # oversampled oracle: 1e7 independent draws of the same 2-d law
        rng = np.random.default_rng(777)
        z = rng.standard_normal((10**7, 2))
        d = np.sqrt(np.sum((post.mean + z * np.sqrt(post.var) - f0.coeffs) ** 2, axis=1))
        oracle = float(np.quantile(d, 0.9))
        got = credible_radius(post, f0, spec, 0.9, 10**5, seed=4)
        assert got == pytest.approx(oracle, rel=0.01)

    def test_monotone_in_level(self):
        post = self._post()
        f0 = CoefficientSequence(np.zeros(2))
        spec = IllPosedSpec(MILD, p=1.0)
        rs = [credible_radius(post, f0, spec, lv, 1000, seed=6) for lv in (0.1, 0.5, 0.9)]
        assert rs[0] <= rs[1] <= rs[2]

    def test_radius_shrinks_with_n(self):
        # averaged over 50 replications, radius(4n) < radius(n)
        spec = IllPosedSpec(MILD, p=1.0)
        prior = GaussianProductPrior(MILD, alpha=1.0)
        f0 = make_truth(1.0, 1.0, N=2**12)
        means = []
        for n in (256, 1024):
            acc = 0.0
            for r in range(50):
                obs = observe(f0, spec, n, 2**12, seed=13, replication=r)
                post = posterior(prior, obs, spec, FSPACE)
                acc += credible_radius(post, f0, spec, 0.9, 200, seed=13, replication=r)
            means.append(acc / 50)
        assert means[1] < means[0]


class TestKlDivergence:
    def test_identical_sequences(self):
        f = make_truth(1.0, 1.0, N=64)
        assert kl_divergence(f, f, 7) == pytest.approx(0.0, abs=1e-14)

    def test_unit_distance(self):
        a = CoefficientSequence(np.array([1.0, 0.0]))
        b = CoefficientSequence(np.array([0.0, 0.0]))
        assert kl_divergence(a, b, 2) == pytest.approx(1.0)

    def test_coordinatewise_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=32)
        y = rng.normal(size=32)
        a = CoefficientSequence(x)
        b = CoefficientSequence(y)
        n = 17
        # per-coordinate KL between N(x_i, 1/n) and N(y_i, 1/n)
        per_coord = np.sum(0.5 * n * (x - y) ** 2)
        assert kl_divergence(a, b, n) == pytest.approx(per_coord, abs=1e-12)


class TestDeterminism:
    def test_posterior_draws_bit_identical(self):
        spec = IllPosedSpec(MILD, p=1.0)
        prior = GaussianProductPrior(MILD, alpha=1.0)
        f0 = make_truth(1.0, 1.0, N=512)
        obs = observe(f0, spec, 500, 512, seed=21)
        post = posterior(prior, obs, spec, FSPACE)
        d1 = posterior_draw_distances(post, f0, spec, 1000, seed=8)
        d2 = posterior_draw_distances(post, f0, spec, 1000, seed=8)
        np.testing.assert_array_equal(d1, d2)


@settings(max_examples=25, deadline=None)
@given(
    lam=st.floats(0.01, 10.0),
    kap=st.floats(0.01, 1.0),
    n=st.integers(1, 10**5),
    y=st.floats(-5.0, 5.0),
)
def test_posterior_variance_never_exceeds_prior_variance(lam, kap, n, y):
    lk2 = lam * kap**2
    var = lk2 / (1.0 + n * lk2)
    assert 0.0 <= var <= lk2
    assert var < lk2  # strict when n > 0 and lam * kap^2 > 0


def test_l2_dist_cross_tails():
    # distance between two power-tail sequences vs a long explicit sum
    f = CoefficientSequence(np.arange(1, 33, dtype=float) ** (-1.6), Tail.power(1.0, 1.6))
    g = CoefficientSequence(0.5 * np.arange(1, 17, dtype=float) ** (-1.3), Tail.power(0.5, 1.3))
    M = 10**6
    i = np.arange(1, M + 1, dtype=float)
    fv = np.concatenate([f.coeffs, f.tail_values(33, M)])
    gv = np.concatenate([g.coeffs, g.tail_values(17, M)])
    brute = np.sqrt(np.sum((fv - gv) ** 2))
    assert l2_dist(f, g) == pytest.approx(brute, abs=1e-6)
