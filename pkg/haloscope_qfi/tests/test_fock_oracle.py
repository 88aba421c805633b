import numpy as np
import pytest

from haloscope_qfi.exceptions import ParameterDomainError, TruncationError
from haloscope_qfi.fock_oracle import (
    FockDensityMatrix,
    amplifier_kraus,
    apply_channel_fock,
    channel_family,
    fidelity,
    fock_from_source,
    loss_kraus,
    qfi_finite_diff,
    squeeze_fock,
    thermal_fock,
    tmsv_output_counts,
    tmsv_output_fock,
    tmsv_output_sectors,
)
from haloscope_qfi.gaussian_core import ChannelParams, SourceKind, SourceSpec, gaussian_fidelity, thermal_state
from haloscope_qfi.qfi_closed_form import Method, qfi_sv, qfi_tmsv, qfi_vacuum_limit


class TestKraus(object):
    def test_loss_is_trace_preserving(self):
        kraus = loss_kraus(0.37, 30)
        assert kraus.completeness_deviation(30) < 1e-12
        assert len(kraus.operators) == 30

    def test_amplifier_is_trace_preserving_below_cutoff(self):
        kraus = amplifier_kraus(1.1, 60)
        assert kraus.completeness_deviation(10) < 1e-12

    def test_ranges(self):
        with pytest.raises(ParameterDomainError):
            loss_kraus(1.5, 10)
        with pytest.raises(ParameterDomainError):
            amplifier_kraus(0.5, 10)


class TestDensityMatrix(object):
    def test_validation(self):
        with pytest.raises(ParameterDomainError):
            FockDensityMatrix(np.eye(3) / 3.0, 4)
        with pytest.raises(ParameterDomainError):
            FockDensityMatrix(np.array([[0.5, 0.3], [0.0, 0.5]]), 2)

    def test_vacuum_through_channel_is_thermal(self):
        vacuum = fock_from_source(SourceSpec(SourceKind.VACUUM))
        for kappa in (0.3, 1.0, 1.5):
            out = apply_channel_fock(vacuum, ChannelParams(kappa, 0.6))
            expected = thermal_fock(0.6, out.cutoff)
            np.testing.assert_allclose(out.matrix, expected.matrix, atol=1e-12)

    def test_photon_number_transfer(self):
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0)
        source = fock_from_source(spec)
        assert source.mean_photon() == pytest.approx(spec.n_squeeze, rel=1e-10)
        out = apply_channel_fock(source, ChannelParams(0.6, 0.1))
        assert out.trace == pytest.approx(1.0)
        assert out.mean_photon() == pytest.approx(0.6 * spec.n_squeeze + 0.1, rel=1e-9)
        assert out.min_eigenvalue() > -1e-12

    def test_source_cutoff_grows(self):
        source = fock_from_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 10.0), cutoff=60)
        assert source.cutoff > 60
        assert source.tail_mass <= 1e-12

    def test_fixed_cutoff_truncation(self):
        with pytest.raises(TruncationError) as e:
            fock_from_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 10.0), cutoff=5, max_cutoff=5)
        assert e.value.tail_mass > 1e-3
        assert e.value.cutoff == 5

    def test_thermal_source_rejected(self):
        with pytest.raises(ParameterDomainError):
            fock_from_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0, 0.1))

    def test_squeezing_vacuum(self):
        vacuum = fock_from_source(SourceSpec(SourceKind.VACUUM), cutoff=40)
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 2.0)
        squeezed = squeeze_fock(vacuum, spec.r, cutoff=120)
        expected = fock_from_source(spec).photon_distribution()
        np.testing.assert_allclose(
            squeezed.photon_distribution()[:20], expected[:20], atol=1e-10
        )


class TestTwoMode(object):
    def test_marginal_photon_numbers(self):
        spec = SourceSpec(SourceKind.TMSV, 4.0)
        out = tmsv_output_sectors(spec.n_squeeze, ChannelParams(0.6, 0.1), cutoff=80)
        assert out.trace == pytest.approx(1.0)
        probs = out.photon_distribution()
        n = np.arange(80)
        assert n @ probs.sum(axis=1) == pytest.approx(0.6 * spec.n_squeeze + 0.1, rel=1e-9)
        assert n @ probs.sum(axis=0) == pytest.approx(spec.n_squeeze, rel=1e-9)

    def test_sectors_match_full_matrix(self):
        n_s = SourceSpec(SourceKind.TMSV, 1.5).n_squeeze
        ch = ChannelParams(0.6, 0.1)
        full = tmsv_output_fock(n_s, ch, cutoff=20)
        sectors = tmsv_output_sectors(n_s, ch, cutoff=20)
        assert full.n_modes == 2
        assert full.trace == pytest.approx(1.0)
        assert full.min_eigenvalue() > -1e-12
        np.testing.assert_allclose(
            full.photon_distribution(), sectors.photon_distribution(), atol=1e-14
        )
        other = tmsv_output_sectors(n_s, ChannelParams(0.6, 0.2), cutoff=20)
        assert fidelity(sectors, other) == pytest.approx(fidelity(full, other.to_fock()), abs=1e-10)

    def test_nulling_returns_vacuum_on_pure_channel(self):
        n_s = SourceSpec(SourceKind.TMSV, 10.0).n_squeeze
        probs, _ = tmsv_output_counts(n_s, ChannelParams(1.0, 1e-6), r2=-np.arcsinh(np.sqrt(n_s)), n_max=20)
        assert probs[0, 0] > 0.999


class TestFidelity(object):
    def test_self_fidelity(self):
        rho = apply_channel_fock(fock_from_source(SourceSpec("sv", 3.0)), ChannelParams(0.5, 0.2))
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_thermal_states_match_gaussian_formula(self):
        got = fidelity(thermal_fock(0.1), thermal_fock(0.3))
        assert got == pytest.approx(gaussian_fidelity(thermal_state(0.1), thermal_state(0.3)), rel=1e-10)

    def test_pads_mismatched_cutoffs(self):
        assert fidelity(thermal_fock(0.1, 40), thermal_fock(0.1, 60)) == pytest.approx(1.0, abs=1e-10)


class TestFiniteDifferenceQfi(object):
    def test_vacuum_limit(self):
        family = channel_family(SourceSpec(SourceKind.VACUUM), 0.6)
        result = qfi_finite_diff(family, 0.1)
        assert result.method is Method.FOCK_ORACLE
        assert result.value == pytest.approx(qfi_vacuum_limit(0.1).value, rel=1e-4)

    def test_squeezed_vacuum(self):
        for gain, kappa, n_b in ((4.0, 0.6, 0.1), (10.0, 0.6, 0.1), (10.0, 1.0, 1e-3)):
            spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain)
            result = qfi_finite_diff(channel_family(spec, kappa), n_b)
            assert result.value == pytest.approx(qfi_sv(spec.n_squeeze, kappa, n_b).value, rel=1e-4)

    def test_tmsv(self):
        spec = SourceSpec(SourceKind.TMSV, 4.0)
        result = qfi_finite_diff(channel_family(spec, 0.6, cutoff=60), 0.1)
        assert result.value == pytest.approx(qfi_tmsv(spec.n_squeeze, 0.6, 0.1).value, rel=1e-4)

    def test_step_must_fit_below_n_b(self):
        family = channel_family(SourceSpec(SourceKind.VACUUM), 0.6)
        with pytest.raises(ParameterDomainError):
            qfi_finite_diff(family, 0.1, eps=0.2)
        with pytest.raises(ParameterDomainError):
            qfi_finite_diff(family, 0.0)

    def test_step_starts_relative_and_grows_within_bounds(self):
        family = channel_family(SourceSpec(SourceKind.VACUUM), 0.6)
        result = qfi_finite_diff(family, 0.1)
        # 1 - F at h = 1e-5 is about 1e-10, below the resolvable infidelity
        assert 1e-5 < result.params["eps"] <= 1e-3
        assert result.flags == ()

    def test_explicit_step_is_kept(self):
        family = channel_family(SourceSpec(SourceKind.VACUUM), 0.6)
        result = qfi_finite_diff(family, 0.1, eps=1e-3)
        assert result.params["eps"] == 1e-3
        assert result.value == pytest.approx(qfi_vacuum_limit(0.1).value, rel=1e-4)
