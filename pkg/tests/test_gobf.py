import numpy as np
import pytest

import obfarx as ox
from obfarx import balanced_allpass, frequency_response, gobf_bank, impulse_response
from oracles import (
    conjugate_closed_poles,
    impulse_by_long_division,
    inner_definition_response,
)


def block_matrix(inner):
    r = inner.realization
    return np.block([[r.A, r.B], [r.C, r.D]])


def unit_circle_gain(inner, n_grid=1024):
    w = 2.0 * np.pi * np.arange(n_grid) / n_grid
    return np.array([abs(inner.evaluate(np.exp(1j * wi))) for wi in w])


class TestBalancedAllpass:
    def test_pure_delay(self):
        inner = balanced_allpass([0.0])
        r = inner.realization
        assert r.A[0, 0] == 0.0
        assert r.B[0, 0] == pytest.approx(1.0)
        assert r.C[0, 0] == pytest.approx(1.0)
        assert r.D[0, 0] == pytest.approx(0.0)
        assert inner.evaluate(2.0) == pytest.approx(0.5)  # G(z) = 1/z

    def test_first_order_closed_form(self):
        inner = balanced_allpass([0.5])
        r = inner.realization
        s = np.sqrt(0.75)
        assert r.A[0, 0] == pytest.approx(0.5)
        assert r.B[0, 0] == pytest.approx(s)
        assert r.C[0, 0] == pytest.approx(s)
        assert r.D[0, 0] == pytest.approx(-0.5)
        M = block_matrix(inner)
        assert np.linalg.norm(M @ M.T - np.eye(2)) < 1e-14

    def test_conjugate_pair_is_allpass_on_grid(self):
        inner = balanced_allpass([0.6 + 0.3j, 0.6 - 0.3j])
        gains = unit_circle_gain(inner)
        assert np.max(np.abs(gains - 1.0)) < 1e-10
        eigs = np.sort_complex(np.linalg.eigvals(inner.realization.A))
        np.testing.assert_allclose(eigs, [0.6 - 0.3j, 0.6 + 0.3j], atol=1e-12)

    def test_rejects_unit_circle_pole(self):
        with pytest.raises(ValueError, match="modulus"):
            balanced_allpass([1.0])
        with pytest.raises(ValueError, match="modulus"):
            balanced_allpass([0.8 + 0.7j, 0.8 - 0.7j])

    def test_rejects_lone_complex_pole(self):
        with pytest.raises(ValueError, match="conjugate"):
            balanced_allpass([0.5 + 0.2j])
        with pytest.raises(ValueError, match="conjugate"):
            balanced_allpass([0.5 + 0.2j, 0.5 + 0.2j])

    @pytest.mark.parametrize("trial", range(20))
    def test_block_orthogonality_random_sets(self, trial):
        rng = np.random.default_rng(500 + trial)
        poles = conjugate_closed_poles(rng, int(rng.integers(1, 5)))
        inner = balanced_allpass(poles)
        M = block_matrix(inner)
        assert np.linalg.norm(M @ M.T - np.eye(M.shape[0])) <= 1e-10
        assert np.max(np.abs(unit_circle_gain(inner, 256) - 1.0)) <= 1e-8


class TestGobfBank:
    def test_delay_chain_impulses(self):
        bank = gobf_bank(balanced_allpass([0.0]), 3, 1)
        H = impulse_response(bank, 6)
        expected = np.zeros((6, 3))
        expected[1, 0] = expected[2, 1] = expected[3, 2] = 1.0
        np.testing.assert_allclose(H, expected, atol=1e-14)

    def test_dimension_bookkeeping(self):
        inner = balanced_allpass([0.3 + 0.4j, 0.3 - 0.4j])
        bank = gobf_bank(inner, 4, 2)
        assert bank.realization.state_dim == 16
        assert bank.realization.output_dim == 16
        assert bank.realization.input_dim == 2
        assert bank.n_basis == 8
        assert bank.regressor_dim == 16

    def test_second_basis_matches_long_division(self):
        # V2(z) = s/(z-0.5) * (1-0.5 z)/(z-0.5), s = sqrt(0.75)
        bank = gobf_bank(balanced_allpass([0.5]), 2, 1)
        H = impulse_response(bank, 30)
        s = np.sqrt(0.75)
        num = [-0.5 * s, s]  # s (1 - 0.5 z) in descending powers
        den = np.polymul([1.0, -0.5], [1.0, -0.5])
        oracle = impulse_by_long_division(num, den, 30)
        np.testing.assert_allclose(H[:, 1], oracle, atol=1e-12)

    def test_chain_couples_through_section_blocks(self):
        inner = balanced_allpass([0.5])
        bank = gobf_bank(inner, 3, 1)
        A = bank.chain_A
        r = inner.realization
        np.testing.assert_allclose(np.diag(A), [0.5, 0.5, 0.5])
        assert A[1, 0] == pytest.approx(r.B[0, 0] * r.C[0, 0])
        assert A[2, 1] == pytest.approx(r.B[0, 0] * r.C[0, 0])
        assert A[2, 0] == pytest.approx(r.B[0, 0] * r.D[0, 0] * r.C[0, 0])
        assert np.allclose(A[np.triu_indices(3, 1)], 0.0)

    def test_empty_bank(self):
        bank = gobf_bank(balanced_allpass([0.5]), 0, 2)
        assert bank.realization.state_dim == 0
        assert bank.realization.output_dim == 0
        assert impulse_response(bank, 4).shape == (4, 0)


class TestFrequencyResponse:
    def test_delay_values(self):
        bank = gobf_bank(balanced_allpass([0.0]), 2, 1)
        np.testing.assert_allclose(frequency_response(bank, 0.0), [1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(frequency_response(bank, np.pi), [-1.0, 1.0], atol=1e-12)

    def test_parseval_unit_norm(self):
        rng = np.random.default_rng(4)
        poles = conjugate_closed_poles(rng, 2)
        bank = gobf_bank(balanced_allpass(poles), 3, 1)
        w = 2.0 * np.pi * np.arange(4096) / 4096
        V = frequency_response(bank, w)
        norms = np.mean(np.abs(V) ** 2, axis=0)
        np.testing.assert_allclose(norms, 1.0, atol=1e-8)

    def test_matches_definition_path(self):
        # chain realization against direct evaluation of the basis formula
        rng = np.random.default_rng(9)
        poles = conjugate_closed_poles(rng, 3)
        inner = balanced_allpass(poles)
        bank = gobf_bank(inner, 4, 1)
        w = np.linspace(0.0, 2.0 * np.pi, 65)[:-1]
        V_chain = frequency_response(bank, w)
        V_def = inner_definition_response(inner, 4, w)
        np.testing.assert_allclose(V_chain, V_def, atol=1e-12)

    def test_tail_follows_geometric_envelope(self):
        from math import comb

        inner = balanced_allpass([0.8])
        bank = gobf_bank(inner, 6, 1)
        H = impulse_response(bank, 240)
        rho = bank.spectral_radius()
        q_check = bank.n_basis
        # repeated poles give a Jordan-type envelope binom(t, q-1) rho^(t-q)
        envelope = comb(200 + q_check, q_check) * rho ** (200 - q_check)
        assert np.max(np.abs(H[200:])) <= envelope


class TestOrthonormality:
    @pytest.mark.parametrize("trial", range(8))
    def test_frequency_domain_gram(self, trial):
        rng = np.random.default_rng(700 + trial)
        n_b = int(rng.integers(1, 4))
        q = int(rng.integers(1, 6))
        poles = conjugate_closed_poles(rng, n_b)
        bank = gobf_bank(balanced_allpass(poles), q, 1)
        w = 2.0 * np.pi * np.arange(8192) / 8192
        V = frequency_response(bank, w)
        gram = (V[:, :, None] * V.conj()[:, None, :]).mean(axis=0)
        assert np.max(np.abs(gram - np.eye(bank.n_basis))) <= 1e-6

    def test_time_domain_gram(self):
        rng = np.random.default_rng(31)
        poles = conjugate_closed_poles(rng, 3, max_radius=0.85)
        bank = gobf_bank(balanced_allpass(poles), 4, 1)
        H = impulse_response(bank, 3000)  # truncation beyond the geometric tail
        gram = H.T @ H
        assert np.max(np.abs(gram - np.eye(bank.n_basis))) <= 1e-6

    def test_projection_residual_nonincreasing_in_q(self):
        # expanding an orthonormal family can only remove residual energy
        plant, _ = ox.random_stable_plant(3, 77, rho=0.8)
        T = 4000
        h_target = np.empty(T)
        x = plant.B[:, 0].copy()
        for t in range(T):
            h_target[t] = plant.C[0] @ x
            x = plant.A @ x
        inner = balanced_allpass([0.5])
        energy = float(h_target[:-1] @ h_target[:-1])
        residuals = []
        for q in range(1, 9):
            H = impulse_response(gobf_bank(inner, q, 1), T)
            # impulse responses start at lag 1; align the strictly proper target
            coeffs = H[1:].T @ h_target[:-1]
            residuals.append(energy - float(coeffs @ coeffs))
        diffs = np.diff(residuals)
        assert np.all(diffs <= 1e-9)
        assert residuals[-1] < residuals[0]
