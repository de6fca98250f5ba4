import math

import numpy as np
import pytest

from dulab import qinfo
from dulab.qinfo import (
    Bipartition,
    DensityMatrix,
    PureState,
    bell_state,
    entropy_vn,
    fidelity,
    kron_states,
    maximally_mixed,
    mutual_information,
    purify,
    reduce,
    relative_entropy,
    sandwiched_renyi,
    trace_distance,
    trace_norm_distance,
    uhlmann_align,
)
from conftest import random_density, random_pure

LN2 = math.log(2.0)


def brute_partial_trace(rho, dims, keep):
    """Explicit index-sum oracle for the partial trace."""
    n = len(dims)
    comp = [i for i in range(n) if i not in keep]
    kdims = [dims[k] for k in keep]
    dk = int(np.prod(kdims))
    out = np.zeros((dk, dk), dtype=complex)
    full = rho.reshape(tuple(dims) * 2)
    for a in np.ndindex(*kdims):
        for b in np.ndindex(*kdims):
            s = 0.0 + 0j
            for c in np.ndindex(*[dims[i] for i in comp]):
                idx_row = [0] * n
                idx_col = [0] * n
                for pos, k in enumerate(keep):
                    idx_row[k] = a[pos]
                    idx_col[k] = b[pos]
                for pos, k in enumerate(comp):
                    idx_row[k] = c[pos]
                    idx_col[k] = c[pos]
                s += full[tuple(idx_row) + tuple(idx_col)]
            out[np.ravel_multi_index(a, kdims), np.ravel_multi_index(b, kdims)] = s
    return out


class TestReduce:
    def test_bell_marginal_is_maximally_mixed(self):
        rho = reduce(bell_state(2), {0})
        assert np.allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_product_state_marginal(self):
        psi = PureState([1, 0, 0, 0], (2, 2))
        rho = reduce(psi, {0})
        assert np.allclose(rho.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_matches_index_sum_oracle(self):
        ra = random_density((2,), seed=10)
        rb = random_density((2,), seed=11)
        rho = DensityMatrix(np.kron(ra.matrix, rb.matrix), (2, 2))
        got = reduce(rho, {1})
        want = brute_partial_trace(rho.matrix, [2, 2], [1])
        assert np.allclose(got.matrix, want, atol=1e-12)
        assert np.allclose(got.matrix, rb.matrix, atol=1e-12)

    @pytest.mark.parametrize("keep", [(0,), (1,), (2,), (0, 2), (1, 2)])
    def test_oracle_on_three_parties(self, keep):
        rho = random_density((2, 3, 2), seed=42)
        got = reduce(rho, keep)
        want = brute_partial_trace(rho.matrix, [2, 3, 2], list(keep))
        assert np.allclose(got.matrix, want, atol=1e-12)

    def test_pure_and_dense_routes_agree(self):
        psi = random_pure((2, 2, 3), seed=3)
        a = reduce(psi, {0, 2})
        b = reduce(psi.density(), {0, 2})
        assert np.allclose(a.matrix, b.matrix, atol=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            reduce(bell_state(2), {2})


class TestEntropy:
    def test_maximally_mixed_qubit(self):
        assert entropy_vn(maximally_mixed((2,))) == pytest.approx(LN2, abs=1e-12)

    def test_pure_state_zero(self):
        assert entropy_vn(random_pure((2, 2), seed=5).density()) == pytest.approx(0.0, abs=1e-10)

    def test_frozen_two_level_value(self):
        # oracle: -(0.75 ln 0.75 + 0.25 ln 0.25)
        rho = DensityMatrix(np.diag([0.75, 0.25]), (2,))
        assert entropy_vn(rho) == pytest.approx(0.5623351446188083, abs=1e-12)

    def test_rejects_negative_eigenvalue(self):
        m = np.diag([1.2, -0.2])
        with pytest.raises(ValueError):
            DensityMatrix(m, (2,))

    def test_additive_on_products(self):
        ra = random_density((2,), rank=2, seed=21)
        rb = random_density((3,), rank=3, seed=22)
        rho = DensityMatrix(np.kron(ra.matrix, rb.matrix), (2, 3))
        assert entropy_vn(rho) == pytest.approx(entropy_vn(ra) + entropy_vn(rb), abs=1e-9)


class TestMutualAndConditional:
    def test_product_has_zero_mutual_information(self):
        ra = random_density((2,), seed=31)
        rb = random_density((2,), seed=32)
        rho = DensityMatrix(np.kron(ra.matrix, rb.matrix), (2, 2))
        assert mutual_information(rho, {0}) == pytest.approx(0.0, abs=1e-10)

    def test_bell_mutual_information(self):
        assert mutual_information(bell_state(2).density(), {0}) == pytest.approx(
            2 * LN2, abs=1e-10
        )

    def test_werner_like_mixture(self):
        # oracle: eigenvalues 5/8 and 1/8 (x3); I = 2 ln 2 - S(AB)
        phi = bell_state(2).density()
        rho = DensityMatrix(0.5 * phi.matrix + 0.5 * np.eye(4) / 4, (2, 2))
        s_ab = -(0.625 * math.log(0.625) + 3 * 0.125 * math.log(0.125))
        want = 2 * LN2 - s_ab
        assert want == pytest.approx(0.3127515147113676, abs=1e-12)
        assert mutual_information(rho, {0}) == pytest.approx(want, abs=1e-10)

    def test_conditional_entropy_of_bell(self):
        # S(B|A) = S(AB) - S(A) = -ln 2 for a Bell pair
        assert qinfo.conditional_entropy(bell_state(2).density(), {0}) == pytest.approx(
            -LN2, abs=1e-10
        )

    def test_araki_lieb_and_subadditivity(self):
        for seed in range(8):
            rho = random_density((2, 2, 2), rank=3, seed=seed)
            sa = entropy_vn(reduce(rho, {0}))
            sb = entropy_vn(reduce(rho, {1, 2}))
            sab = entropy_vn(rho)
            assert abs(sa - sb) <= sab + 1e-9
            assert sab <= sa + sb + 1e-9


class TestDistances:
    def test_self_distance_zero(self):
        rho = random_density((2, 2), seed=1)
        assert trace_norm_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        a = PureState([1, 0], (2,)).density()
        b = PureState([0, 1], (2,)).density()
        assert trace_norm_distance(a, b) == pytest.approx(2.0, abs=1e-12)
        assert trace_distance(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_bell_vs_maximally_mixed(self):
        # eigenvalues of Phi - I/4 are {3/4, -1/4, -1/4, -1/4}
        assert trace_norm_distance(bell_state(2).density(), maximally_mixed((2, 2))) == (
            pytest.approx(1.5, abs=1e-12)
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            trace_norm_distance(maximally_mixed((2,)), maximally_mixed((3,)))


class TestFidelity:
    def test_self_fidelity(self):
        rho = random_density((2, 2), seed=7)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_bell_vs_maximally_mixed(self):
        # pure-vs-sigma shortcut sqrt(<psi|sigma|psi>) = 1/q
        assert fidelity(bell_state(2).density(), maximally_mixed((2, 2))) == pytest.approx(
            0.5, abs=1e-10
        )

    def test_orthogonal_pures(self):
        a = PureState([1, 0], (2,)).density()
        b = PureState([0, 1], (2,)).density()
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-8)

    def test_symmetry(self):
        rho = random_density((2, 2), seed=8)
        sig = random_density((2, 2), rank=2, seed=9)
        assert fidelity(rho, sig) == pytest.approx(fidelity(sig, rho), abs=1e-10)

    def test_fidelity_chain_and_pinsker(self):
        # 1 - F <= D_tr <= sqrt(1 - F^2), D_tr <= sqrt(S/2)
        for seed in range(10):
            rho = random_density((2, 2), seed=100 + seed)
            sig = random_density((2, 2), seed=200 + seed)
            f = fidelity(rho, sig)
            d = trace_distance(rho, sig)
            s = relative_entropy(rho, sig)
            assert 1 - f <= d + 1e-9
            assert d <= math.sqrt(max(0.0, 1 - f * f)) + 1e-9
            if s != math.inf:
                assert d <= math.sqrt(s / 2) + 1e-9
                # monotonicity bound: F >= exp(-S/2)
                assert f >= math.exp(-0.5 * s) - 1e-9


class TestRelativeEntropy:
    def test_self_zero(self):
        rho = random_density((2, 2), seed=3)
        assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)

    def test_vs_maximally_mixed_identity(self):
        rho = random_density((2, 2), seed=4)
        want = math.log(4) - entropy_vn(rho)
        assert relative_entropy(rho, maximally_mixed((2, 2))) == pytest.approx(want, abs=1e-9)

    def test_disjoint_support_sentinel(self):
        a = PureState([1, 0], (2,)).density()
        b = PureState([0, 1], (2,)).density()
        assert relative_entropy(a, b) == math.inf


class TestSandwichedRenyi:
    def test_half_equals_minus_two_log_fidelity(self):
        for seed in range(10):
            rho = random_density((2, 2), seed=300 + seed)
            sig = random_density((2, 2), seed=400 + seed)
            want = -2 * math.log(fidelity(rho, sig))
            assert sandwiched_renyi(rho, sig, 0.5) == pytest.approx(want, abs=1e-9)

    def test_equal_states_zero_for_all_alpha(self):
        rho = random_density((2, 2), rank=2, seed=5)
        for alpha in (0.3, 0.5, 0.9, 1.5, 2.0):
            assert sandwiched_renyi(rho, rho, alpha) == pytest.approx(0.0, abs=1e-9)

    def test_monotone_in_alpha(self):
        grid = [0.3, 0.5, 0.7, 0.9, 1.1, 2.0]
        for seed in range(6):
            rho = random_density((2, 2), seed=500 + seed)
            sig = random_density((2, 2), seed=600 + seed)
            vals = [sandwiched_renyi(rho, sig, a) for a in grid]
            for lo, hi in zip(vals, vals[1:]):
                assert hi >= lo - 1e-9

    def test_interpolates_relative_entropy(self):
        rho = random_density((2,), seed=6)
        sig = random_density((2,), seed=7)
        near_one = sandwiched_renyi(rho, sig, 1.0 + 1e-6)
        assert near_one == pytest.approx(relative_entropy(rho, sig), abs=1e-4)

    def test_singular_sigma_alpha_gt_one(self):
        rho = maximally_mixed((2,))
        sig = PureState([1, 0], (2,)).density()
        assert sandwiched_renyi(rho, sig, 2.0) == math.inf

    def test_bad_alpha(self):
        rho = maximally_mixed((2,))
        with pytest.raises(ValueError):
            sandwiched_renyi(rho, rho, 1.0)


class TestPurify:
    def test_maximally_mixed_purifies_to_bell(self):
        psi = purify(maximally_mixed((2,)))
        assert psi.dims == (2, 2)
        assert entropy_vn(reduce(psi, {0})) == pytest.approx(LN2, abs=1e-10)

    def test_pure_state_gets_trivial_ancilla(self):
        rho = random_pure((2, 2), seed=1).density()
        psi = purify(rho)
        assert psi.dims == (2, 2, 1)

    def test_round_trip_rank3(self):
        rho = random_density((2, 2), rank=3, seed=12)
        psi = purify(rho)
        assert psi.dims[-1] == 3
        back = reduce(psi, range(rho.n_subsystems))
        assert np.allclose(back.matrix, rho.matrix, atol=1e-10)

    def test_padded_ancilla(self):
        rho = random_density((2,), rank=1, seed=13)
        psi = purify(rho, ancilla_dim=3)
        assert psi.dims == (2, 3)
        back = reduce(psi, {0})
        assert np.allclose(back.matrix, rho.matrix, atol=1e-10)


class TestUhlmannAlign:
    def test_identical_purifications(self):
        psi = purify(random_density((2, 2), seed=14))
        w, overlap = uhlmann_align(psi, psi, {psi.n_subsystems - 1})
        assert overlap == pytest.approx(1.0, abs=1e-10)

    def test_basis_rotated_purifications_of_maximally_mixed(self):
        psi = purify(maximally_mixed((2,)))
        u = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        phi = qinfo.apply_unitary(psi, u, (1,))
        w, overlap = uhlmann_align(psi, phi, {1})
        assert overlap == pytest.approx(1.0, abs=1e-10)

    def test_achieved_overlap_equals_fidelity(self):
        for seed in range(6):
            rho = random_density((2, 2), seed=700 + seed)
            sig = random_density((2, 2), seed=800 + seed)
            psi = purify(rho, ancilla_dim=4)
            phi = purify(sig, ancilla_dim=4)
            anc = {2}
            w, overlap = uhlmann_align(psi, phi, anc)
            assert overlap == pytest.approx(fidelity(rho, sig), abs=1e-9)
            # the overlap is actually achieved by W on the ancilla
            aligned = qinfo.apply_unitary(psi, w, (2,))
            assert abs(phi.overlap(aligned)) == pytest.approx(overlap, abs=1e-9)

    def test_rank_deficient_states_at_conditioning_limit(self):
        # fidelity has a sqrt singularity at rank deficiency, so agreement
        # between the two routes is only ~sqrt(eps_machine) there
        rho = random_density((2, 2), seed=701)
        sig = random_density((2, 2), rank=3, seed=801)
        psi = purify(rho, ancilla_dim=4)
        phi = purify(sig, ancilla_dim=4)
        _, overlap = uhlmann_align(psi, phi, {2})
        assert overlap == pytest.approx(fidelity(rho, sig), abs=1e-7)

    def test_ancilla_dim_mismatch(self):
        psi = purify(maximally_mixed((2,)), ancilla_dim=2)
        phi = purify(maximally_mixed((2,)), ancilla_dim=3)
        with pytest.raises(ValueError):
            uhlmann_align(psi, phi, {1})


class TestStateTypes:
    def test_pure_state_norm_enforced(self):
        with pytest.raises(ValueError):
            PureState([1, 1], (2,))

    def test_dims_length_enforced(self):
        with pytest.raises(ValueError):
            PureState([1, 0, 0], (2, 2))

    def test_density_matrix_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[0.5, 0.5], [0.2, 0.5]]), (2,))

    def test_bipartition_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Bipartition([0, 0])

    def test_permute_subsystems(self):
        psi = kron_states(random_pure((2,), seed=1), random_pure((3,), seed=2))
        swapped = qinfo.permute_subsystems(psi, (1, 0))
        assert swapped.dims == (3, 2)
        back = qinfo.permute_subsystems(swapped, (1, 0))
        assert np.allclose(back.amplitudes, psi.amplitudes)
