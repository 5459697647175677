import math

import numpy as np
import pytest

from nvsense.core import DEFAULT_CONSTANTS, DegenerateTransitionError
from nvsense.hamiltonian import (TransitionPair, build_hamiltonian,
                                 eigen_hermitian_3, g_value, invert_field,
                                 transition_frequencies)

GB = DEFAULT_CONSTANTS.gamma_nv * 32.59  # 913.30216 MHz
D = DEFAULT_CONSTANTS.zero_field_d


class TestBuildHamiltonian:
    def test_aligned_field_is_diagonal(self):
        h = build_hamiltonian(32.59, 0.0).matrix
        assert np.allclose(h, np.diag([D + GB, 0.0, D - GB]), atol=1e-9)
        assert np.diag(h)[0].real == pytest.approx(3783.30216)
        assert np.diag(h)[2].real == pytest.approx(1956.69784)

    def test_zero_field(self):
        h = build_hamiltonian(0.0, 1.0).matrix
        assert np.allclose(h, np.diag([D, 0.0, D]), atol=1e-12)

    def test_tilted_off_diagonal_structure(self):
        theta = math.radians(3.5)
        h = build_hamiltonian(32.59, theta).matrix
        assert np.allclose(h, h.conj().T)
        expected = GB * math.sin(theta) / math.sqrt(2.0)
        assert h[0, 1] == pytest.approx(expected)
        assert h[1, 2] == pytest.approx(expected)
        assert h[0, 2] == pytest.approx(0.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            build_hamiltonian(-1.0, 0.0)
        with pytest.raises(ValueError):
            build_hamiltonian(10.0, -0.1)
        with pytest.raises(ValueError):
            build_hamiltonian(10.0, math.pi / 2 + 0.1)
        with pytest.raises(ValueError):
            build_hamiltonian(float("nan"), 0.0)


class TestEigen:
    def test_diagonal_input(self):
        w, v = eigen_hermitian_3(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(w, [1.0, 2.0, 3.0])
        # columns are standard basis vectors up to phase
        assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]], atol=1e-12)

    def test_identity_degenerate(self):
        w, v = eigen_hermitian_3(np.eye(3))
        assert np.allclose(w, [1.0, 1.0, 1.0])
        assert np.allclose(v.conj().T @ v, np.eye(3), atol=1e-10)

    def test_cubic_characteristic_polynomial_oracle(self):
        # independent eigenvalue route: roots of det(H - x I)
        h = build_hamiltonian(32.59, math.radians(3.5)).matrix
        c2 = -np.trace(h).real
        minors = 0.0
        for i in range(3):
            rows = [r for r in range(3) if r != i]
            sub = h[np.ix_(rows, rows)]
            minors += (sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0]).real
        c0 = -np.linalg.det(h).real
        roots = np.sort(np.roots([1.0, c2, minors, c0]).real)
        w, _ = eigen_hermitian_3(h)
        assert np.allclose(w, roots, rtol=1e-9, atol=1e-6)

    def test_residual_property_random_fields(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            b0 = rng.uniform(0.0, 200.0)
            theta = rng.uniform(0.0, math.pi / 2)
            ham = build_hamiltonian(b0, theta)
            w, v = eigen_hermitian_3(ham)
            h = ham.matrix
            scale = max(1.0, np.linalg.norm(h))
            assert np.linalg.norm(h @ v - v * w) <= 1e-9 * scale
            assert np.allclose(v.conj().T @ v, np.eye(3), atol=1e-10)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            eigen_hermitian_3(np.eye(2))


class TestTransitionFrequencies:
    def test_aligned_analytic(self):
        pair = transition_frequencies(32.59, 0.0)
        assert pair.f_minus == pytest.approx(D - GB, rel=1e-12)
        assert pair.f_plus == pytest.approx(D + GB, rel=1e-12)

    def test_zero_field_degenerate(self):
        with pytest.raises(DegenerateTransitionError):
            transition_frequencies(0.0, 0.0)

    def test_forward_model_hits_measured_lines(self):
        # the fitted field must reproduce the measured resonances within
        # their quoted uncertainties
        pair = transition_frequencies(32.59, math.radians(3.5))
        assert abs(pair.f_minus - 1960.00) < 6.78
        assert abs(pair.f_plus - 3783.39) < 3.39

    def test_zero_tilt_splitting_identity(self):
        for b0 in np.linspace(5.0, 100.0, 25):
            pair = transition_frequencies(b0, 0.0)
            split = pair.f_plus - pair.f_minus
            assert split == pytest.approx(2.0 * DEFAULT_CONSTANTS.gamma_nv * b0,
                                          rel=1e-9)

    def test_labelling_beats_energy_order_near_crossing(self):
        # at 100 mT the |-1>-like level has dropped almost onto |0>: the
        # |0>-like state is now the LOWEST eigenvalue, so any labelling
        # that assumes the low-field energy order (middle = |0>) breaks;
        # overlap labelling still returns the analytic pair
        b0 = 100.0
        gb = DEFAULT_CONSTANTS.gamma_nv * b0
        assert 0 < D - gb < 100.0  # just below the crossing
        pair = transition_frequencies(b0, 0.0)
        assert pair.f_minus == pytest.approx(D - gb, rel=1e-9)
        assert pair.f_plus == pytest.approx(D + gb, rel=1e-9)
        w, _ = eigen_hermitian_3(build_hamiltonian(b0, 0.0))
        assert abs(w[0]) < 1e-9  # |0> state is the bottom of the spectrum

    def test_beyond_crossing_flagged(self):
        # past gamma B = D the f_minus transition goes negative and the
        # two-sided labelling contract no longer applies
        with pytest.raises(DegenerateTransitionError):
            transition_frequencies(150.0, 0.0)


class TestTransitionPair:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            TransitionPair(3000.0, 2000.0)
        with pytest.raises(ValueError):
            TransitionPair(-5.0, 2000.0)
        with pytest.raises(ValueError):
            TransitionPair(2870.0, 2870.0)


class TestInvertField:
    def test_measured_line_pair(self):
        est = invert_field(TransitionPair(1960.00, 3783.39), (6.78, 3.39))
        assert abs(est.b0 - 32.59) < 0.05
        assert abs(math.degrees(est.theta) - 3.5) < 1.0
        assert est.b0_err > 0 and est.theta_err > 0

    def test_round_trip_grid(self):
        for b0 in [5.0, 20.0, 32.59, 60.0, 100.0]:
            for theta_deg in [0.0, 5.0, 10.0, 20.0]:
                theta = math.radians(theta_deg)
                pair = transition_frequencies(b0, theta)
                est = invert_field(pair)
                assert abs(est.b0 - b0) / b0 < 1e-4
                assert abs(est.theta - theta) <= 1e-4 * max(theta, 1e-2)

    def test_residual_at_optimum_tiny(self):
        pair = transition_frequencies(30.0, math.radians(7.0))
        est = invert_field(pair)
        back = transition_frequencies(est.b0, est.theta)
        ss = (back.f_minus - pair.f_minus) ** 2 \
            + (back.f_plus - pair.f_plus) ** 2
        assert ss < 1e-6

    def test_tilt_monotone_in_sum_perturbation(self):
        # pushing f_minus up at fixed f_plus moves the pair off the
        # theta = 0 manifold; recovered tilt grows with the push
        thetas = []
        for delta in [0.5, 1.0, 2.0, 4.0, 8.0]:
            est = invert_field(TransitionPair(1956.69784 + delta, 3783.30216))
            thetas.append(est.theta)
        assert all(b > a for a, b in zip(thetas, thetas[1:]))

    def test_out_of_model_pair_rejected(self):
        # sum deviating from 2D by more than gamma*b_max cannot come from
        # any field inside the search box
        with pytest.raises(ValueError):
            invert_field(TransitionPair(7000.0, 7200.0))

    def test_negative_errors_rejected(self):
        with pytest.raises(ValueError):
            invert_field(TransitionPair(1960.0, 3783.39), (-1.0, 0.0))


class TestGValue:
    def test_direct_evaluation(self):
        g = g_value(914.7, 32.59)
        assert g == pytest.approx(2.005, abs=0.002)

    def test_unit_construction(self):
        b0 = 17.3
        assert g_value(DEFAULT_CONSTANTS.mu_b_over_h * b0, b0) \
            == pytest.approx(1.0, rel=1e-12)

    def test_free_electron_case(self):
        assert g_value(2.0 * DEFAULT_CONSTANTS.mu_b_over_h * 20.0, 20.0) \
            == pytest.approx(2.0, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            g_value(914.7, 0.0)
        with pytest.raises(ValueError):
            g_value(-5.0, 30.0)
