import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdsteer import (
    BipartiteState,
    DensityMatrix,
    KrausChannel,
    ValidationError,
    add_white_noise,
    apply,
    choi_of,
    depolarizing,
    dual_apply,
    isotropic,
    iso_sn_threshold,
    max_entangled_state,
    mub_measurements,
    mub_nsim_threshold,
    peb_certificate,
    pib_witness_check,
    rank_with_tol,
    state_to_channel,
)
from hdsteer.steering import max_entangled_vector
from hdsteer.qcore import projector

import support


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim) / dim)


def channels_agree(a: KrausChannel, b: KrausChannel, atol: float) -> bool:
    """Compare two channels on the full matrix-unit basis."""
    assert a.dim_in == b.dim_in and a.dim_out == b.dim_out
    for i in range(a.dim_in):
        for j in range(a.dim_in):
            unit = np.zeros((a.dim_in, a.dim_in), dtype=complex)
            unit[i, j] = 1.0
            out_a = sum(k @ unit @ k.conj().T for k in a.kraus_ops)
            out_b = sum(k @ unit @ k.conj().T for k in b.kraus_ops)
            if np.max(np.abs(out_a - out_b)) > atol:
                return False
    return True


# The six-state 2-design: uniform product mixture equal to iso(1/3) on qubits.
def two_design_product_vectors() -> list[np.ndarray]:
    kets = [
        np.array([1.0, 0.0]),
        np.array([0.0, 1.0]),
        np.array([1.0, 1.0]) / np.sqrt(2),
        np.array([1.0, -1.0]) / np.sqrt(2),
        np.array([1.0, 1.0j]) / np.sqrt(2),
        np.array([1.0, -1.0j]) / np.sqrt(2),
    ]
    return [np.kron(v, np.conj(v)) / np.sqrt(6.0) for v in kets]


class TestApply:
    def test_identity_channel(self):
        rng = np.random.default_rng(1)
        rho = support.rand_density(rng, 3)
        ident = KrausChannel(3, 3, (np.eye(3, dtype=complex),))
        assert_allclose(apply(ident, rho).matrix, rho.matrix, atol=1e-14)

    def test_fully_depolarizing(self):
        rng = np.random.default_rng(2)
        rho = support.rand_density(rng, 3)
        assert_allclose(apply(depolarizing(3, 0.0), rho).matrix, np.eye(3) / 3, atol=1e-13)

    def test_unit_visibility_depolarizing_is_identity(self):
        rng = np.random.default_rng(3)
        rho = support.rand_density(rng, 3)
        channel = depolarizing(3, 1.0)
        assert len(channel.kraus_ops) == 1
        assert_allclose(apply(channel, rho).matrix, rho.matrix, atol=1e-14)

    def test_depolarized_half_of_max_entangled_is_isotropic(self):
        for dim, eta in ((2, 0.4), (3, 0.75)):
            phi = max_entangled_state(dim)
            dep = depolarizing(dim, eta)
            lifted = sum(
                np.kron(k, np.eye(dim)) @ phi.matrix @ np.kron(k, np.eye(dim)).conj().T
                for k in dep.kraus_ops
            )
            assert_allclose(lifted, isotropic(dim, eta).matrix, atol=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            apply(depolarizing(3, 0.5), maximally_mixed(2))


class TestDualApply:
    def test_identity_channel(self):
        m = mub_measurements(3)
        ident = KrausChannel(3, 3, (np.eye(3, dtype=complex),))
        assert support.max_dev(dual_apply(ident, m).inputs, m.inputs) < 1e-14

    @pytest.mark.parametrize("dim,eta", [(2, 0.3), (3, 0.7), (4, 0.9)])
    def test_dual_of_depolarizing_is_white_noise(self, dim, eta):
        rng = np.random.default_rng(10 + dim)
        m = support.rand_measurements(rng, dim, 2, 3)
        lhs = dual_apply(depolarizing(dim, eta), m)
        rhs = add_white_noise(m, eta)
        assert support.max_dev(lhs.inputs, rhs.inputs) < 1e-12

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_heisenberg_duality_identity(self, dim):
        rng = np.random.default_rng(20 + dim)
        for _ in range(5):
            channel = support.rand_channel(rng, dim, dim, 3)
            rho = support.rand_density(rng, dim)
            m = support.rand_measurements(rng, dim, 2, 2)
            heis = dual_apply(channel, m)
            out = apply(channel, rho)
            for x in range(2):
                for a in range(2):
                    lhs = np.trace(m.inputs[x][a] @ out.matrix)
                    rhs = np.trace(heis.inputs[x][a] @ rho.matrix)
                    assert abs(lhs - rhs) < 1e-10


class TestChoiDuality:
    def test_identity_channel_standard_reference(self):
        ident = KrausChannel(3, 3, (np.eye(3, dtype=complex),))
        choi = choi_of(ident, maximally_mixed(3))
        assert_allclose(choi.matrix, projector(max_entangled_vector(3)), atol=1e-13)

    @pytest.mark.parametrize("dim,eta", [(2, 0.2), (3, 0.5), (4, 0.8)])
    def test_depolarizing_choi_is_isotropic(self, dim, eta):
        choi = choi_of(depolarizing(dim, eta), maximally_mixed(dim))
        assert_allclose(choi.matrix, isotropic(dim, eta).matrix, atol=1e-13)

    def test_max_entangled_choi_gives_identity_channel(self):
        phi = max_entangled_state(2)
        channel = state_to_channel(phi, maximally_mixed(2))
        ident = KrausChannel(2, 2, (np.eye(2, dtype=complex),))
        assert channels_agree(channel, ident, 1e-10)

    def test_isotropic_choi_gives_depolarizing_action(self):
        channel = state_to_channel(
            BipartiteState.from_matrix(isotropic(3, 0.6).matrix, 3, 3), maximally_mixed(3)
        )
        ket0 = DensityMatrix(np.diag([1.0, 0.0, 0.0]))
        assert_allclose(
            apply(channel, ket0).matrix, 0.6 * ket0.matrix + 0.4 * np.eye(3) / 3, atol=1e-10
        )

    @pytest.mark.parametrize("dim", [2, 3])
    def test_round_trip_random_channels_and_marginals(self, dim):
        rng = np.random.default_rng(30 + dim)
        for _ in range(5):
            channel = support.rand_channel(rng, dim, dim, 3)
            sigma = support.rand_density(rng, dim)
            choi = choi_of(channel, sigma)
            assert_allclose(
                np.einsum("ijil->jl", choi.matrix.reshape(dim, dim, dim, dim)),
                sigma.matrix,
                atol=1e-12,
            )
            rebuilt = state_to_channel(choi.bipartite(), sigma)
            assert channels_agree(channel, rebuilt, 1e-9)

    def test_rectangular_round_trip(self):
        rng = np.random.default_rng(35)
        channel = support.rand_channel(rng, 2, 3, 2)
        sigma = support.rand_density(rng, 2)
        rebuilt = state_to_channel(choi_of(channel, sigma).bipartite(), sigma)
        assert channels_agree(channel, rebuilt, 1e-9)

    def test_rejects_rank_deficient_marginal(self):
        with pytest.raises(ValidationError):
            choi_of(depolarizing(2, 0.5), DensityMatrix(np.diag([1.0, 0.0])))

    def test_rejects_marginal_mismatch(self):
        rng = np.random.default_rng(36)
        state = support.rand_bipartite(rng, 2, 2)
        with pytest.raises(ValidationError):
            state_to_channel(state, maximally_mixed(2))


class TestKrausRanks:
    def test_fully_depolarizing_is_level_one(self):
        cert = peb_certificate(depolarizing(2, 0.0))
        assert cert.max_rank == 1 and set(cert.kraus_ranks) == {1}

    def test_identity_channel_level_equals_dimension(self):
        cert = peb_certificate(KrausChannel(4, 4, (np.eye(4, dtype=complex),)))
        assert cert.n == 4 and cert.kraus_ranks == (4,)

    @pytest.mark.parametrize("rank", [1, 2, 3])
    def test_pure_dual_state_rank_matches_schmidt_rank(self, rank):
        # |psi> with `rank` Schmidt terms on C^3 (x) C^rank; the reference
        # marginal is then full rank and the single Kraus operator inherits
        # the Schmidt rank
        coeffs = np.sqrt(np.arange(1, rank + 1, dtype=float))
        coeffs /= np.linalg.norm(coeffs)
        psi = np.zeros((3, rank), dtype=complex)
        for i in range(rank):
            psi[i, i] = coeffs[i]
        vec = psi.reshape(-1)
        state = BipartiteState.from_matrix(np.outer(vec, vec.conj()), 3, rank)
        sigma = DensityMatrix(psi.conj().T @ psi)
        channel = state_to_channel(state, sigma)
        assert peb_certificate(channel).kraus_ranks == (rank,)

    def test_isotropic_third_eigendecomposition_vs_product_fixture(self):
        state = BipartiteState.from_matrix(isotropic(2, 1.0 / 3.0).matrix, 2, 2)
        from_eigen = state_to_channel(state, maximally_mixed(2))
        assert peb_certificate(from_eigen).max_rank == 2
        from_products = state_to_channel(
            state, maximally_mixed(2), decomposition=two_design_product_vectors()
        )
        assert peb_certificate(from_products).max_rank == 1

    def test_transposed_kraus_ops_keep_ranks(self):
        rng = np.random.default_rng(41)
        channel = support.rand_channel(rng, 3, 3, 3)
        for k in channel.kraus_ops:
            assert rank_with_tol(k.T) == rank_with_tol(k)

    def test_transposed_measurements_stay_valid(self):
        rng = np.random.default_rng(42)
        m = support.rand_measurements(rng, 3, 2, 3)
        from hdsteer import MeasurementSet

        transposed = MeasurementSet(3, tuple(tuple(e.T for e in povm) for povm in m.inputs))
        assert transposed.dim == 3

    def test_rejects_bad_decomposition(self):
        state = BipartiteState.from_matrix(isotropic(2, 0.5).matrix, 2, 2)
        with pytest.raises(ValidationError):
            state_to_channel(state, maximally_mixed(2), decomposition=two_design_product_vectors())


class TestPibWitness:
    def test_identity_channel_refuted(self):
        check = pib_witness_check(KrausChannel(4, 4, (np.eye(4, dtype=complex),)), maximally_mixed(4), 3)
        assert check.refuted
        assert check.witness_value == pytest.approx(2.0, abs=1e-12)
        assert check.bound == pytest.approx(1.90192379, abs=1e-8)

    def test_half_depolarizing_not_refuted_at_level_one(self):
        check = pib_witness_check(depolarizing(4, 0.5), maximally_mixed(4), 1)
        assert not check.refuted
        assert check.witness_value == pytest.approx(1.25, abs=1e-12)

    @pytest.mark.parametrize("dim,n", [(2, 1), (3, 1), (4, 2)])
    def test_refutation_onset_at_mub_threshold(self, dim, n):
        eta_star = mub_nsim_threshold(dim, n)
        below = pib_witness_check(depolarizing(dim, eta_star - 0.01), maximally_mixed(dim), n)
        above = pib_witness_check(depolarizing(dim, eta_star + 0.01), maximally_mixed(dim), n)
        assert not below.refuted and above.refuted

    def test_level_one_peb_channel_never_refuted(self):
        # a certified entanglement-breaking channel maps inside every level
        channel = depolarizing(2, iso_sn_threshold(2, 1))
        state = BipartiteState.from_matrix(isotropic(2, 1.0 / 3.0).matrix, 2, 2)
        rebuilt = state_to_channel(
            state, maximally_mixed(2), decomposition=two_design_product_vectors()
        )
        assert peb_certificate(rebuilt).max_rank == 1
        assert channels_agree(channel, rebuilt, 1e-10)
        for n in (1, 2):
            assert not pib_witness_check(channel, maximally_mixed(2), n).refuted

    def test_rejects_rectangular_channel(self):
        rng = np.random.default_rng(43)
        with pytest.raises(ValidationError):
            pib_witness_check(support.rand_channel(rng, 2, 3, 2), maximally_mixed(2), 1)


class TestChannelValidation:
    def test_kraus_completeness_enforced(self):
        with pytest.raises(ValidationError):
            KrausChannel(2, 2, (np.eye(2, dtype=complex) * 0.9,))

    def test_depolarizing_visibility_range(self):
        with pytest.raises(ValidationError):
            depolarizing(2, 1.5)

    def test_json_round_trip(self):
        rng = np.random.default_rng(44)
        channel = support.rand_channel(rng, 2, 3, 2)
        back = KrausChannel.from_json(channel.to_json())
        assert back.dim_in == 2 and back.dim_out == 3
        assert all(
            np.max(np.abs(a - b)) < 1e-15 for a, b in zip(back.kraus_ops, channel.kraus_ops)
        )

    def test_choi_marginal_consistency_enforced(self):
        from hdsteer import ChoiState

        with pytest.raises(ValidationError):
            ChoiState(2, 2, isotropic(2, 0.5).matrix, DensityMatrix(np.diag([0.9, 0.1])))
