import numpy as np
import pytest

from haloscope_qfi.exceptions import ConfigError, NumericalConvergenceError, ParameterDomainError
from haloscope_qfi.fock_oracle import apply_channel_fock, fock_from_source, squeeze_fock, tmsv_output_counts
from haloscope_qfi.gaussian_core import ChannelParams, SourceKind, SourceSpec
from haloscope_qfi.measurements import (
    OVERFLOW,
    CountDistribution,
    NulledSvParams,
    NulledTmsvParams,
    direct_pd_tmsv_distribution,
    fi_bell,
    fi_direct_pd_tmsv,
    fi_from_distribution,
    fi_homodyne_sv,
    fi_homodyne_vacuum,
    fi_photon_counting_vacuum,
    hypergeometric_count_distribution,
    joint_count_distribution,
    mle_estimate,
    nulled_sv_covariance,
    nulled_sv_distribution,
    nulled_sv_fi,
    nulled_tmsv_covariance,
    nulled_tmsv_distribution,
    nulled_tmsv_fi,
    nulling_asymptote_sv,
    nulling_asymptote_tmsv,
    photon_distribution_single,
    sample_counts,
    sv_nulling_squeeze,
    tmsv_nulling_angle,
)
from haloscope_qfi.qfi_closed_form import Method, qfi_sv, qfi_tmsv, qfi_vacuum_limit


def geometric_model(n_max=200):
    return lambda x: photon_distribution_single((x + 0.5) * np.eye(2), n_max)


class TestCountDistribution(object):
    def test_single_mode(self):
        dist = CountDistribution([0.5, 0.25, 0.125])
        assert not dist.joint
        assert dist.n_max == 2
        assert dist.tail_mass == pytest.approx(0.125)
        assert dist.mean() == pytest.approx(0.5)
        assert list(dist.to_frame().columns) == ["n", "prob"]

    def test_joint(self):
        dist = CountDistribution(np.full((2, 2), 0.25))
        assert dist.joint
        np.testing.assert_allclose(dist.marginal(0), [0.5, 0.5])
        assert list(dist.to_frame().columns) == ["n", "n_A", "prob"]

    def test_rejects_invalid(self):
        with pytest.raises(NumericalConvergenceError):
            CountDistribution([0.5, -0.1])
        with pytest.raises(NumericalConvergenceError):
            CountDistribution([0.7, 0.7])


class TestGaussianReceivers(object):
    def test_vacuum_homodyne(self):
        assert fi_homodyne_vacuum(0.1).value == pytest.approx(2.0 / 1.2 ** 2)
        assert fi_homodyne_vacuum(0.1, n_t=0.05, kappa=0.5).value == pytest.approx(
            0.5 / (0.1 + 0.025 + 0.5) ** 2
        )

    def test_squeezed_homodyne_without_squeezing(self):
        assert fi_homodyne_sv(1.0, 1.0, 0.1).value == pytest.approx(fi_homodyne_vacuum(0.1).value)

    def test_squeezed_homodyne_lossless(self):
        gain, n_b = 10.0, 1e-3
        assert fi_homodyne_sv(gain, 1.0, n_b).value == pytest.approx(
            2.0 * gain ** 2 / (1.0 + 2.0 * gain * n_b) ** 2
        )

    def test_bell(self):
        assert fi_bell(1.0, 1.0, 0.1).value == pytest.approx(1.0 / 1.1 ** 2)

    def test_bell_is_3db_below_squeezed_homodyne(self):
        for gain_db in np.linspace(0.0, 20.0, 21):
            gain = 10 ** (gain_db / 10)
            ratio = fi_bell(gain, 1.0, 1e-5).value / fi_homodyne_sv(gain, 1.0, 1e-5).value
            assert ratio == pytest.approx(0.5, rel=1e-2)
            exact = (1 + 2 * gain * 1e-3) ** 2 / (2 * (1 + gain * 1e-3) ** 2)
            assert fi_bell(gain, 1.0, 1e-3).value / fi_homodyne_sv(
                gain, 1.0, 1e-3
            ).value == pytest.approx(exact, rel=1e-10)

    def test_photon_counting_reaches_vacuum_limit(self):
        assert fi_photon_counting_vacuum(0.2).value == pytest.approx(qfi_vacuum_limit(0.2).value)
        with pytest.raises(ParameterDomainError):
            fi_photon_counting_vacuum(0.0)


class TestCountLaws(object):
    def test_thermal_is_geometric(self):
        n_bar = 0.3
        probs = photon_distribution_single((n_bar + 0.5) * np.eye(2), 30).probs
        n = np.arange(31)
        np.testing.assert_allclose(probs, n_bar ** n / (n_bar + 1.0) ** (n + 1), rtol=1e-10)

    def test_squeezed_vacuum_matches_number_basis(self):
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0)
        probs = photon_distribution_single(np.diag([2.0, 0.125]), 40).probs
        expected = fock_from_source(spec).photon_distribution()[:41]
        np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_nulled_parameters_match_covariance(self):
        for squeeze, n_t in ((None, 0.0), (0.3, 0.0), (0.8, 0.0), (None, 0.05)):
            channel = NulledSvParams.channel(10.0, 0.6, 0.1, n_t, squeeze)
            cov = nulled_sv_covariance(10.0, 0.6, 0.1, n_t, squeeze)
            numeric = NulledSvParams.from_covariance(cov)
            assert channel.a == pytest.approx(numeric.a, rel=1e-10)
            assert abs(channel.b) == pytest.approx(abs(numeric.b), rel=1e-10)

    def test_nulled_tmsv_parameters_match_covariance(self):
        n_s = SourceSpec(SourceKind.TMSV, 10.0).n_squeeze
        channel = NulledTmsvParams.channel(n_s, 0.6, 1e-3)
        numeric = NulledTmsvParams.from_covariance(nulled_tmsv_covariance(n_s, 0.6, 1e-3))
        assert channel.n_r == pytest.approx(numeric.n_r, rel=1e-8)
        assert channel.n_a == pytest.approx(numeric.n_a, rel=1e-8)
        assert channel.c == pytest.approx(numeric.c, rel=1e-8)

    def test_finite_sum_matches_hypergeometric(self):
        n_s = SourceSpec(SourceKind.TMSV, 10.0).n_squeeze
        cov = nulled_tmsv_covariance(n_s, 0.6, 1e-3)
        params = NulledTmsvParams.from_covariance(cov)
        hyper = hypergeometric_count_distribution(params, 40).probs
        finite = joint_count_distribution(cov[0, 0], cov[2, 2], cov[0, 2], 40).probs
        np.testing.assert_allclose(hyper, finite, atol=1e-12)
        assert hyper.sum() == pytest.approx(1.0, abs=1e-9)

    def test_lossless_nulling_uses_finite_sum(self):
        cov = nulled_tmsv_covariance(2.0, 1.0, 1e-3)
        dist = nulled_tmsv_distribution(2.0, 1.0, 1e-3, 40)
        finite = joint_count_distribution(cov[0, 0], cov[2, 2], cov[0, 2], 40)
        np.testing.assert_allclose(dist.probs, finite.probs, atol=1e-14)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_nulled_tmsv_matches_oracle(self):
        n_s = SourceSpec(SourceKind.TMSV, 10.0).n_squeeze
        oracle, _ = tmsv_output_counts(
            n_s, ChannelParams(0.6, 1e-3), r2=tmsv_nulling_angle(n_s, 0.6), n_max=40
        )
        formula = nulled_tmsv_distribution(n_s, 0.6, 1e-3, 40).probs
        np.testing.assert_allclose(formula, oracle, atol=1e-8)

    def test_nulled_sv_normalizes(self):
        dist = nulled_sv_distribution(10.0, 0.6, 1e-3)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_nulled_sv_matches_oracle(self):
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 10.0)
        rho = apply_channel_fock(fock_from_source(spec), ChannelParams(0.6, 1e-3))
        oracle = squeeze_fock(rho, -spec.r, cutoff=2 * rho.cutoff).photon_distribution()[:41]
        formula = nulled_sv_distribution(10.0, 0.6, 1e-3, 40).probs
        np.testing.assert_allclose(formula, oracle, atol=1e-8)

    def test_uncorrelated_product(self):
        dist = hypergeometric_count_distribution(NulledTmsvParams(0.1, 0.2, 0.0), 10)
        np.testing.assert_allclose(dist.probs, np.outer(dist.marginal(0), dist.marginal(1)))

    def test_nulling_rejects_amplifiers(self):
        with pytest.raises(ParameterDomainError):
            nulled_sv_distribution(4.0, 1.5, 0.6)

    def test_direct_detection_methods_agree(self):
        fock = direct_pd_tmsv_distribution(0.5, 0.6, 0.1, n_max=20, method="fock", cutoff=80)
        closed = direct_pd_tmsv_distribution(0.5, 0.6, 0.1, n_max=20, method="closed")
        np.testing.assert_allclose(fock.probs, closed.probs, atol=1e-10)
        with pytest.raises(ParameterDomainError):
            direct_pd_tmsv_distribution(0.5, 0.6, 0.1, method="guess")


class TestFisherFromCounts(object):
    def test_geometric(self):
        result = fi_from_distribution(geometric_model(), 0.1)
        assert result.method is Method.DISTRIBUTION
        assert result.value == pytest.approx(qfi_vacuum_limit(0.1).value, rel=1e-6)
        assert result.flags == ()

    def test_truncated_flag(self):
        result = fi_from_distribution(geometric_model(n_max=5), 2.0)
        assert result.flags == ("truncated",)

    def test_step_bounds(self):
        with pytest.raises(ParameterDomainError):
            fi_from_distribution(geometric_model(), 0.1, step=0.05)

    def test_sv_nulling_is_optimal_on_lossless_channel(self):
        for gain_db in (0.0, 5.0, 10.0, 15.0):
            gain = 10 ** (gain_db / 10)
            n_s = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain).n_squeeze
            ratio = nulled_sv_fi(gain, 1.0, 1e-3).value / qfi_sv(n_s, 1.0, 1e-3).value
            assert 0.95 <= ratio <= 1.001

    def test_relative_step_at_vanishing_noise(self):
        # a unit gain leaves a thermal return with occupation n_b
        for n_b in (4.5e-9, 1e-12):
            result = fi_from_distribution(lambda x: nulled_sv_distribution(1.0, 1.0, x, 40), n_b)
            assert result.params["step"] == pytest.approx(1e-3 * n_b)
            assert result.value == pytest.approx(qfi_vacuum_limit(n_b).value, rel=1e-6)

    def test_nulling_at_vanishing_noise(self):
        n_s = SourceSpec(SourceKind.SQUEEZED_VACUUM, 10.0).n_squeeze
        for n_b in (1e-9, 1e-13):
            result = nulled_sv_fi(10.0, 1.0 - 1e-10, n_b, n_max=60, mode="fixed")
            assert 0 < result.value <= qfi_sv(n_s, 1.0 - 1e-10, n_b).value * 1.001

    def test_tmsv_nulling_is_optimal(self):
        for kappa in (0.6, 1.0):
            for gain_db in (0.0, 5.0, 10.0, 15.0):
                n_s = SourceSpec(SourceKind.TMSV, 10 ** (gain_db / 10)).n_squeeze
                ratio = nulled_tmsv_fi(n_s, kappa, 1e-3).value / qfi_tmsv(n_s, kappa, 1e-3).value
                assert 0.95 <= ratio <= 1.001

    def test_nulling_beats_direct_detection(self):
        nulled = nulled_tmsv_fi(1.0, 0.6, 1e-3, n_max=60).value
        direct = fi_direct_pd_tmsv(1.0, 0.6, 1e-3, n_max=60, method="closed").value
        assert nulled > direct

    def test_asymptotes(self):
        assert nulling_asymptote_sv(2.0, 1e-3) == pytest.approx(5.0 / 1e-3)
        assert nulling_asymptote_tmsv(1.0, 1.0, 1e-3) == pytest.approx(2.0 / 1e-3)
        n_b = 1e-7
        assert qfi_sv(2.0, 1.0, n_b).value == pytest.approx(nulling_asymptote_sv(2.0, n_b), rel=1e-4)


class TestSampling(object):
    def test_seed_is_required(self):
        with pytest.raises(ParameterDomainError):
            sample_counts(CountDistribution([0.5, 0.5]), 10, None)

    def test_deterministic(self):
        dist = geometric_model(50)(0.3)
        first = sample_counts(dist, 1000, 42)
        np.testing.assert_array_equal(first, sample_counts(dist, 1000, 42))
        assert first.min() >= 0

    def test_overflow_bucket(self):
        dist = CountDistribution([0.5, 0.25])
        samples = sample_counts(dist, 4000, 1)
        assert set(np.unique(samples)) <= {0, 1, OVERFLOW}
        assert np.mean(samples == OVERFLOW) == pytest.approx(0.25, abs=0.03)

    def test_joint_samples(self):
        dist = CountDistribution(np.full((2, 2), 0.25))
        samples = sample_counts(dist, 100, 3)
        assert samples.shape == (100, 2)


class TestMaximumLikelihood(object):
    def test_estimate_near_truth(self):
        model = geometric_model()
        samples = sample_counts(model(0.1), 10000, 11)
        result = mle_estimate(samples, model, (0.005, 2.0))
        sigma = np.sqrt(0.1 * 1.1 / 10000)
        assert abs(result.estimate - 0.1) < 5 * sigma
        assert result.estimate == pytest.approx(samples.mean(), rel=1e-4)
        assert result.curvature > 0
        assert result.n_samples == 10000

    def test_boundary_flag(self):
        result = mle_estimate(np.zeros(100, dtype=int), geometric_model(), (0.01, 1.0))
        assert result.flags == ("boundary",)

    def test_bracket_validation(self):
        with pytest.raises(ParameterDomainError):
            mle_estimate(np.zeros(10, dtype=int), geometric_model(), (0.5, 0.1))

    def test_variance_saturates_cramer_rao(self):
        n_b, n_samples = 0.1, 10000
        model = geometric_model()
        truth = model(n_b)
        seeds = np.random.SeedSequence(2024).spawn(1000)
        estimates = [
            mle_estimate(sample_counts(truth, n_samples, seed), model, (0.005, 2.0)).estimate
            for seed in seeds
        ]
        crb = 1.0 / (n_samples * qfi_vacuum_limit(n_b).value)
        assert 0.85 <= np.var(estimates, ddof=1) / crb <= 1.25

    def test_tmsv_nulling_saturates_cramer_rao(self):
        n_b, n_samples = 1e-3, 10000
        n_s = SourceSpec(SourceKind.TMSV, 10.0).n_squeeze

        def model(x):
            return nulled_tmsv_distribution(n_s, 0.6, x, 30)

        truth = model(n_b)
        seeds = np.random.SeedSequence(7).spawn(200)
        estimates = [
            mle_estimate(sample_counts(truth, n_samples, seed), model, (n_b / 20, n_b * 20)).estimate
            for seed in seeds
        ]
        crb = 1.0 / (n_samples * nulled_tmsv_fi(n_s, 0.6, n_b, n_max=30).value)
        assert 0.7 <= np.var(estimates, ddof=1) / crb <= 1.35


class TestSvNullingStrength(object):
    def test_fixed_strength_undoes_source_squeezing(self):
        assert sv_nulling_squeeze(10.0, 0.6, 1e-3, mode="fixed") == pytest.approx(0.5 * np.log(10.0))
        assert sv_nulling_squeeze(1.0, 0.6, 1e-3) == 0.0
        with pytest.raises(ConfigError):
            sv_nulling_squeeze(10.0, 0.6, 1e-3, mode="adaptive")

    def test_optimized_strength_on_lossy_channel(self):
        for gain_db in (5.0, 10.0, 15.0):
            gain = 10 ** (gain_db / 10)
            n_s = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain).n_squeeze
            fixed = nulled_sv_fi(gain, 0.6, 1e-3, mode="fixed")
            optimized = nulled_sv_fi(gain, 0.6, 1e-3, mode="optimized")
            assert optimized.value >= fixed.value
            assert 0 <= optimized.params["squeeze"] <= 1.5 * fixed.params["squeeze"]
            assert optimized.value <= qfi_sv(n_s, 0.6, 1e-3).value * 1.001
