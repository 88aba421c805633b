import numpy as np
import pytest

from haloscope_qfi.exceptions import ParameterDomainError
from haloscope_qfi.gaussian_core import (
    ChannelParams,
    SourceKind,
    SourceSpec,
    apply_amplifier,
    apply_channel,
    apply_loss,
    beamsplitter,
    decompose_channel,
    gaussian_fidelity,
    is_physical,
    make_source,
    photon_number,
    symplectic_form,
    symplectic_transform,
    thermal_state,
    two_mode_squeeze,
    vacuum_state,
)


class TestChannelParams(object):
    def test_kinds(self):
        assert ChannelParams(0.5, 0.1).kind == "thermal-loss"
        assert ChannelParams(1.0, 0.1).kind == "awgn"
        assert ChannelParams(2.0, 1.5).kind == "amplifier"

    def test_unphysical_rejected(self):
        with pytest.raises(ParameterDomainError):
            ChannelParams(2.0, 0.5)
        with pytest.raises(ParameterDomainError):
            ChannelParams(-0.1, 0.1)
        with pytest.raises(ParameterDomainError):
            ChannelParams(0.5, float("nan"))

    def test_output_params(self):
        out = ChannelParams(0.6, 0.1).output_params(n_t=0.5)
        assert out.mu == pytest.approx(4 * 0.1 + 2 * 0.4)
        assert out.nu == pytest.approx(2.0)


class TestSources(object):
    def test_parse_aliases(self):
        assert SourceKind.parse("squeezed") is SourceKind.SQUEEZED_VACUUM
        assert SourceKind.parse("TMSV") is SourceKind.TMSV
        with pytest.raises(ParameterDomainError):
            SourceKind.parse("coherent")

    def test_photon_numbers(self):
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 10.0)
        assert spec.r == pytest.approx(0.5 * np.log(10.0))
        assert spec.n_squeeze == pytest.approx(np.sinh(spec.r) ** 2)
        assert spec.n_s == pytest.approx(spec.n_squeeze)
        assert spec.gain_db == pytest.approx(10.0)
        assert SourceSpec(SourceKind.TMSV, 10.0, 0.2).n_s > spec.n_squeeze

    def test_from_photon_number_inverts_n_squeeze(self):
        for n_s in (0.0, 0.01, 1.0, 30.0):
            spec = SourceSpec.from_photon_number("tmsv", n_s)
            assert spec.n_squeeze == pytest.approx(n_s, abs=1e-12)

    def test_vacuum_gain_is_one(self):
        with pytest.raises(ParameterDomainError):
            SourceSpec(SourceKind.VACUUM, 2.0)
        with pytest.raises(ParameterDomainError):
            SourceSpec(SourceKind.SQUEEZED_VACUUM, 0.5)

    def test_squeezed_vacuum_covariance(self):
        state = make_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0))
        np.testing.assert_allclose(state.cov, np.diag([2.0, 0.125]))
        assert is_physical(state)

    def test_tmsv_covariance(self):
        spec = SourceSpec(SourceKind.TMSV, 4.0)
        state = make_source(spec)
        assert state.n_modes == 2
        assert is_physical(state)
        for mode in (0, 1):
            assert photon_number(state, mode) == pytest.approx(spec.n_squeeze)
        assert state.cov[0, 2] == pytest.approx(0.5 * np.sinh(2 * spec.r))
        assert state.cov[1, 3] == pytest.approx(-0.5 * np.sinh(2 * spec.r))

    def test_contaminated_source_photons(self):
        spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0, 0.3)
        assert photon_number(make_source(spec)) == pytest.approx(spec.n_s)


class TestChannels(object):
    def test_vacuum_through_channel_is_thermal(self):
        out = apply_channel(vacuum_state(), ChannelParams(0.6, 0.2))
        np.testing.assert_allclose(out.cov, 0.7 * np.eye(2))
        assert photon_number(out) == pytest.approx(0.2)

    def test_decomposition(self):
        state = make_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 5.0))
        for kappa, n_b in ((0.3, 0.1), (1.0, 0.5), (1.5, 0.7)):
            ch = ChannelParams(kappa, n_b)
            eta, g = decompose_channel(ch)
            composed = apply_amplifier(apply_loss(state, eta), g)
            np.testing.assert_allclose(composed.cov, apply_channel(state, ch).cov, atol=1e-12)

    def test_channel_on_signal_arm_only(self):
        state = make_source(SourceSpec(SourceKind.TMSV, 4.0))
        out = apply_channel(state, ChannelParams(0.5, 0.1), mode=0)
        np.testing.assert_allclose(out.block(1), state.block(1))
        np.testing.assert_allclose(out.block(0, 1), np.sqrt(0.5) * state.block(0, 1))
        with pytest.raises(ParameterDomainError):
            apply_channel(state, ChannelParams(0.5, 0.1), mode=2)

    def test_loss_and_amplifier_ranges(self):
        with pytest.raises(ParameterDomainError):
            apply_loss(vacuum_state(), 1.2)
        with pytest.raises(ParameterDomainError):
            apply_amplifier(vacuum_state(), 0.9)

    def test_states_are_read_only(self):
        state = thermal_state(0.1)
        with pytest.raises(ValueError):
            state.cov[0, 0] = 3.0


class TestSymplectic(object):
    def test_generators_are_symplectic(self):
        omega = symplectic_form(2)
        for s in (beamsplitter(0.3), two_mode_squeeze(0.7)):
            np.testing.assert_allclose(s @ omega @ s.T, omega, atol=1e-12)

    def test_beamsplitter_mixes_modes(self):
        state = make_source(SourceSpec(SourceKind.SQUEEZED_VACUUM, 4.0))
        pair = vacuum_state(2).replace(cov=np.block(
            [[state.cov, np.zeros((2, 2))], [np.zeros((2, 2)), 0.5 * np.eye(2)]]
        ))
        mixed = symplectic_transform(pair, "beamsplitter", np.pi / 4, (0, 1))
        assert photon_number(mixed, 0) == pytest.approx(photon_number(mixed, 1))
        assert is_physical(mixed)

    def test_bad_transforms(self):
        with pytest.raises(ParameterDomainError):
            symplectic_transform(vacuum_state(2), "two_mode_squeeze", 0.1, (0,))
        with pytest.raises(ParameterDomainError):
            symplectic_transform(vacuum_state(2), "rotate", 0.1, (0,))


class TestFidelity(object):
    def test_self_fidelity(self):
        for state in (vacuum_state(), thermal_state(0.3), make_source(SourceSpec("sv", 3.0))):
            assert gaussian_fidelity(state, state) == pytest.approx(1.0)

    def test_thermal_states_are_distinguishable(self):
        assert gaussian_fidelity(thermal_state(0.1), thermal_state(0.5)) < 1.0
