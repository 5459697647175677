import numpy as np
import pytest

from nvsense.core import (DEFAULT_CONSTANTS, TWO_PI, FieldEstimate,
                          PhysicalConstants, Trace, XKind, angular_to_mhz,
                          mhz_to_angular, spin1_operators)


def test_default_constants_values():
    c = DEFAULT_CONSTANTS
    assert c.gamma_nv == pytest.approx(28.024)
    assert c.zero_field_d == pytest.approx(2870.0)
    assert c.gamma_c13 == pytest.approx(0.010708)
    assert c.gamma_n14 == pytest.approx(0.003077)
    assert c.mu_b_over_h == pytest.approx(13.9962, rel=1e-5)


def test_dipolar_prefactor_against_si_constants():
    # independent recomputation from CODATA values in SI units
    mu0 = 1.25663706212e-6        # T m / A
    h = 6.62607015e-34            # J s
    mu_b = 9.2740100783e-24       # J / T
    g_e = 2.00231930436
    gamma_nv_hz_per_t = DEFAULT_CONSTANTS.gamma_nv * 1e6 * 1e3  # Hz/T
    gamma_dark_hz_per_t = g_e * mu_b / h
    # f(r, theta=0)/ (3cos^2-1)=... prefactor in MHz nm^3:
    pref = (mu0 / (4 * np.pi)) * h * gamma_nv_hz_per_t * gamma_dark_hz_per_t
    pref_mhz_nm3 = pref * 1e27 / 1e6
    assert DEFAULT_CONSTANTS.dipolar_prefactor == pytest.approx(
        pref_mhz_nm3, rel=1e-4)
    # order of magnitude sanity: ~52 MHz nm^3
    assert 51.5 < DEFAULT_CONSTANTS.dipolar_prefactor < 52.5


def test_constants_replace_rederives_prefactor():
    c = DEFAULT_CONSTANTS.replace(gamma_nv=28.03)
    assert c.gamma_nv == 28.03
    assert c.dipolar_prefactor == pytest.approx(
        DEFAULT_CONSTANTS.dipolar_prefactor * 28.03 / 28.024, rel=1e-12)


def test_constants_g_sanity_check():
    # gamma/mu_b must stay near the electron g; a wild ratio is a unit slip
    with pytest.raises(ValueError):
        PhysicalConstants(gamma_nv=100.0)


def test_angular_conversions_round_trip():
    f = np.array([0.314, 2.827, 921.080])
    assert np.allclose(angular_to_mhz(mhz_to_angular(f)), f, rtol=1e-15)
    assert mhz_to_angular(1.0) == pytest.approx(TWO_PI)


def test_spin1_operators_algebra():
    sx, sy, sz = spin1_operators()
    # commutator [Sx, Sy] = i Sz and Casimir S(S+1) = 2
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    assert np.allclose(sx @ sx + sy @ sy + sz @ sz, 2.0 * np.eye(3),
                       atol=1e-12)
    assert np.allclose(sz, np.diag([1.0, 0.0, -1.0]))
    with pytest.raises(ValueError):
        sx[0, 0] = 5.0  # read-only


def test_xkind_units():
    assert XKind.FREQUENCY.unit == "MHz"
    assert XKind.PULSE_LENGTH.unit == "us"
    assert XKind.EVOLUTION_TIME.unit == "us"


class TestTrace:
    def test_basic_construction(self):
        x = np.linspace(0, 1, 5)
        tr = Trace(x, XKind.PULSE_LENGTH, {"SIG1": np.ones(5)}, n_avg=100)
        assert tr.n_avg == 100
        assert tr.channel_names == ("SIG1",)
        assert np.all(tr.channel("SIG1") == 1.0)

    def test_rejects_non_increasing_x(self):
        with pytest.raises(ValueError):
            Trace(np.array([0.0, 1.0, 1.0]), XKind.FREQUENCY,
                  {"a": np.zeros(3)})
        with pytest.raises(ValueError):
            Trace(np.array([2.0, 1.0]), XKind.FREQUENCY, {"a": np.zeros(2)})

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Trace(np.array([0.0, 1.0]), XKind.FREQUENCY, {"a": np.zeros(3)})

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Trace(np.array([0.0, 1.0]), XKind.FREQUENCY,
                  {"a": np.array([1.0, np.nan])})

    def test_rejects_bad_n_avg(self):
        x = np.array([0.0, 1.0])
        with pytest.raises(ValueError):
            Trace(x, XKind.FREQUENCY, {"a": np.zeros(2)}, n_avg=0)
        with pytest.raises(ValueError):
            Trace(x, XKind.FREQUENCY, {"a": np.zeros(2)}, n_avg=1.5)

    def test_channels_are_copied_and_locked(self):
        x = np.array([0.0, 1.0])
        src = np.array([1.0, 2.0])
        tr = Trace(x, XKind.FREQUENCY, {"a": src})
        src[0] = 99.0
        assert tr.channel("a")[0] == 1.0
        with pytest.raises(ValueError):
            tr.channel("a")[0] = 5.0

    def test_unknown_channel(self):
        tr = Trace(np.array([0.0, 1.0]), XKind.FREQUENCY, {"a": np.zeros(2)})
        with pytest.raises(KeyError):
            tr.channel("nope")

    def test_with_channels_preserves_axis(self):
        tr = Trace(np.array([0.0, 1.0]), XKind.PULSE_LENGTH,
                   {"a": np.zeros(2)}, n_avg=7)
        tr2 = tr.with_channels({"b": np.ones(2)})
        assert tr2.n_avg == 7
        assert tr2.x_kind is XKind.PULSE_LENGTH
        assert tr2.channel_names == ("b",)
        assert np.all(tr2.x == tr.x)


def test_field_estimate_validation():
    fe = FieldEstimate(b0=32.59, theta=0.061, b0_err=0.02, theta_err=0.01)
    assert fe.b0 == 32.59
    with pytest.raises(ValueError):
        FieldEstimate(b0=-1.0, theta=0.0)
    with pytest.raises(ValueError):
        FieldEstimate(b0=1.0, theta=2.0)  # beyond pi/2
