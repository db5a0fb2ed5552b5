import numpy as np
import pytest

from dynamics import dephasing_analytic, x_rotation_analytic
from errors import InvalidFidelity
from matfun import hs_norm
from measures import (
    MeasureKind,
    imaginarity_angle,
    is_real,
    m_g,
    m_r,
    m_tr,
    measure,
    min_geometric_within_fidelity,
    von_neumann_entropy,
)
from states import (
    basis_state,
    decompose,
    maximally_mixed,
    mis_state,
    random_density_matrix,
    theta_state,
    validate,
)

import oracles


class TestMaximallyImaginaryState:
    def test_relative_entropy(self):
        assert m_r(mis_state()) == pytest.approx(np.log(2), abs=1e-10)

    def test_geometric(self):
        assert m_g(mis_state()) == pytest.approx(0.5, abs=1e-10)

    def test_trace_distance(self):
        assert m_tr(mis_state()) == pytest.approx(1.0, abs=1e-10)

    def test_angle(self):
        assert imaginarity_angle(mis_state()) == pytest.approx(np.pi / 4, abs=1e-8)


class TestRealStates:
    @pytest.mark.parametrize('rho', [basis_state(0), basis_state(1), maximally_mixed(2), maximally_mixed(3)])
    def test_every_measure_vanishes(self, rho):
        assert is_real(rho)
        assert m_tr(rho) == 0.0
        assert m_r(rho) == 0.0
        assert m_g(rho) == 0.0
        assert imaginarity_angle(rho) == 0.0

    def test_tiny_imaginary_part_counts_as_real(self):
        rho = validate([[0.5, 1e-12j], [-1e-12j, 0.5]])
        assert is_real(rho)
        assert m_tr(rho) == 0.0


class TestThetaStates:
    @pytest.mark.parametrize('theta', [0.1, np.pi / 4, np.pi / 3, np.pi / 2, 2.5])
    def test_trace_distance(self, theta):
        assert m_tr(theta_state(theta)) == pytest.approx(np.sin(theta), abs=1e-12)

    @pytest.mark.parametrize('theta', [0.1, np.pi / 4, np.pi / 3, np.pi / 2])
    def test_relative_entropy_is_binary_entropy_of_populations(self, theta):
        expected = oracles.binary_entropy(np.cos(theta / 2) ** 2)
        assert m_r(theta_state(theta)) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize('theta', [0.1, np.pi / 4, np.pi / 3, np.pi / 2, 2.5])
    def test_geometric(self, theta):
        assert m_g(theta_state(theta)) == pytest.approx((1 - abs(np.cos(theta))) / 2, abs=1e-10)

    @pytest.mark.parametrize('theta', [0.1, np.pi / 4, np.pi / 3, np.pi / 2])
    def test_angle_is_half_theta(self, theta):
        assert imaginarity_angle(theta_state(theta)) == pytest.approx(theta / 2, abs=1e-7)

    def test_x_rotation_trace_distance(self):
        for t in np.linspace(0.0, np.pi, 100):
            assert m_tr(x_rotation_analytic(1.0, t)) == pytest.approx(abs(np.sin(2 * t)), abs=1e-6)


class TestGeneralProperties:
    def test_entropy_of_maximally_mixed(self):
        assert von_neumann_entropy(maximally_mixed(3)) == pytest.approx(np.log(3))
        assert von_neumann_entropy(basis_state(0)) == 0.0

    @pytest.mark.parametrize('d', [2, 3])
    def test_ranges_and_transpose_invariance(self, rng, d):
        for _ in range(50):
            rho = random_density_matrix(d, rng)
            assert 0.0 <= m_tr(rho) <= 1.0 + 1e-12
            assert 0.0 <= m_g(rho) <= 0.5 + 1e-12
            assert 0.0 <= m_r(rho) <= np.log(d) + 1e-12
            assert m_tr(rho.transpose()) == pytest.approx(m_tr(rho), abs=1e-12)
            assert m_r(rho.transpose()) == pytest.approx(m_r(rho), abs=1e-10)
            assert m_g(rho.transpose()) == pytest.approx(m_g(rho), abs=1e-9)

    @pytest.mark.parametrize('kind', list(MeasureKind))
    def test_convex_on_mixtures(self, rng, kind):
        for _ in range(20):
            rho, sigma = random_density_matrix(2, rng), random_density_matrix(2, rng)
            p = rng.uniform()
            mix = validate(p * rho.matrix + (1 - p) * sigma.matrix)
            assert measure(mix, kind) <= p * measure(rho, kind) + (1 - p) * measure(sigma, kind) + 1e-9

    @pytest.mark.parametrize('d', [2, 3])
    def test_real_orthogonal_invariance(self, rng, d):
        for _ in range(30):
            rho = random_density_matrix(d, rng)
            o = np.linalg.qr(rng.standard_normal((d, d)))[0]
            rotated = validate(o @ rho.matrix @ o.T)
            assert m_tr(rotated) == pytest.approx(m_tr(rho), abs=1e-9)
            assert m_r(rotated) == pytest.approx(m_r(rho), abs=1e-9)
            assert m_g(rotated) == pytest.approx(m_g(rho), abs=1e-9)

    @pytest.mark.parametrize('theta', [np.pi / 2, np.pi / 3, np.pi / 4])
    @pytest.mark.parametrize('kind', list(MeasureKind))
    def test_non_increasing_under_dephasing(self, theta, kind):
        values = [measure(dephasing_analytic(theta, 2.0, 0.0, t), kind) for t in np.linspace(0.0, 2.0, 81)]
        assert np.all(np.diff(values) <= 1e-12)
        assert values[-1] < values[0]

    @pytest.mark.parametrize('kind', list(MeasureKind))
    def test_zero_exactly_for_real_states(self, rng, kind):
        for k in range(200):
            rho = random_density_matrix(2 + k % 2, rng)
            for state in (rho, validate(decompose(rho).re.matrix)):
                assert (measure(state, kind) == 0.0) == (hs_norm(decompose(state).im) <= 1e-10)

    def test_dispatch_by_value(self):
        assert measure(mis_state(), 'tr') == m_tr(mis_state())
        assert measure(mis_state(), 'rel') == m_r(mis_state())
        assert measure(mis_state(), 'geom') == m_g(mis_state())

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            measure(mis_state(), 'bogus')


class TestMinGeometricWithinFidelity:
    def test_unit_fidelity_keeps_the_measure(self):
        rho = theta_state(np.pi / 3)
        assert min_geometric_within_fidelity(rho, 1.0) == pytest.approx(m_g(rho), abs=1e-12)

    def test_zero_fidelity_reaches_a_real_state(self):
        assert min_geometric_within_fidelity(mis_state(), 0.0) == 0.0

    def test_half_fidelity_from_mis(self):
        assert min_geometric_within_fidelity(mis_state(), 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_partial_move(self):
        f = np.cos(np.pi / 8) ** 2
        assert min_geometric_within_fidelity(mis_state(), f) == pytest.approx(np.sin(np.pi / 8) ** 2, abs=1e-9)

    @pytest.mark.parametrize('f', [-0.1, 1.5])
    def test_invalid_target(self, f):
        with pytest.raises(InvalidFidelity):
            min_geometric_within_fidelity(mis_state(), f)
