import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qstein import opalg, rand, symmetry
from qstein.errors import (NotOrthogonal, NotPermutationInvariant,
                           PremiseFailed, ZeroOverlap)
from qstein.opalg import SystemShape

RNG = np.random.default_rng(99)


@pytest.mark.parametrize("n,d,want", [(3, 2, 4), (2, 3, 6), (1, 5, 5)])
def test_sym_dim(n, d, want):
    assert symmetry.sym_dim(n, d) == want


class TestSymProjector:
    def test_single_copy_identity(self):
        assert_allclose(symmetry.sym_projector(1, 3).mat, np.eye(3))

    def test_two_qubits(self):
        p = symmetry.sym_projector(2, 2)
        assert abs(p.trace() - 3.0) < 1e-12
        singlet = np.array([0.0, 1.0, -1.0, 0.0]) / math.sqrt(2.0)
        assert np.linalg.norm(p.mat @ singlet) < 1e-14

    def test_trace_equals_dimension(self):
        for n, d in [(3, 2), (4, 2), (2, 3)]:
            p = symmetry.sym_projector(n, d)
            assert abs(p.trace() - symmetry.sym_dim(n, d)) < 1e-8

    def test_idempotent(self):
        p = symmetry.sym_projector(3, 2).mat
        assert opalg.trace_norm_mat(p @ p - p) < 1e-10

    def test_against_permutation_average(self):
        # independent oracle: (1/n!) sum of permutation unitaries
        n, d = 3, 2
        dims = (d,) * n
        acc = np.zeros((d ** n, d ** n))
        for perm in itertools.permutations(range(n)):
            u = np.zeros((d ** n, d ** n))
            for i in range(d ** n):
                idx = np.unravel_index(i, dims)
                j = int(np.ravel_multi_index([idx[k] for k in perm], dims))
                u[j, i] = 1.0
            acc += u
        acc /= math.factorial(n)
        assert_allclose(symmetry.sym_projector(n, d).mat, acc, atol=1e-12)


class TestSymmetrizeTail:
    def test_r_zero_power(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        out = symmetry.symmetrize_tail(base, None, 3, 0)
        want = np.zeros(8)
        want[0] = 1.0
        assert_allclose(out.vec, want)

    def test_two_placements(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        psi = opalg.pure(np.array([0.0, 1.0]))
        out = symmetry.symmetrize_tail(base, psi, 2, 1)
        want = np.zeros(4)
        want[1] = want[2] = 1.0 / math.sqrt(2.0)
        assert_allclose(out.vec, want, atol=1e-14)

    def test_unit_norm_r2(self):
        base = rand.random_pure(RNG, SystemShape((3,)))
        u = symmetry._unitary_with_first_column(base.vec)
        raw = RNG.standard_normal((2, 2)) + 1j * RNG.standard_normal((2, 2))
        raw = raw + raw.T  # symmetric under factor swap
        emb = np.zeros((3, 3), dtype=complex)
        emb[1:, 1:] = raw
        psi_m = np.einsum("ia,jb,ab->ij", u, u, emb)
        psi = opalg.pure(psi_m.reshape(-1), (3, 3))
        out = symmetry.symmetrize_tail(base, psi, 3, 2)
        assert abs(np.linalg.norm(out.vec) - 1.0) < 1e-12

    def test_rejects_overlapping_tail(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        psi = opalg.pure(np.array([0.6, 0.8]))
        with pytest.raises(NotOrthogonal):
            symmetry.symmetrize_tail(base, psi, 2, 1)


class TestAlmostPower:
    def test_r0_is_power(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        spec = symmetry.AlmostPowerSpec(base, 3, 0, (1.0 + 0j,), (None,))
        v = symmetry.build_almost_power(spec)
        want = opalg.pure_power(base, 3).vec
        assert abs(abs(np.vdot(v.vec, want)) - 1.0) < 1e-12

    def test_single_defect_orthogonal_to_power(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        psi = opalg.pure(np.array([0.0, 1.0]))
        spec = symmetry.AlmostPowerSpec(base, 3, 1, (0.0, 1.0),
                                        (None, psi))
        v = symmetry.build_almost_power(spec)
        power = opalg.pure_power(base, 3).vec
        assert abs(np.vdot(v.vec, power)) < 1e-14

    def test_random_specs_live_in_sym_subspace(self):
        for _ in range(5):
            base = rand.random_pure(RNG, SystemShape((2,)))
            v = symmetry.random_almost_power(RNG, base, 4, 2)
            assert symmetry.sym_residual(v) < 1e-10

    def test_extraction_roundtrip(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = symmetry.random_almost_power(RNG, base, 4, 2)
        spec = symmetry.extract_almost_power_spec(v, base, 2)
        v2 = symmetry.build_almost_power(spec)
        assert np.abs(v2.vec - v.vec).max() < 1e-12

    def test_spec_validates_normalization(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            symmetry.AlmostPowerSpec(base, 2, 0, (0.5 + 0j,), (None,))


class TestTruncation:
    def test_already_truncated_unchanged(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = symmetry.random_almost_power(RNG, base, 4, 2)
        out, dist = symmetry.truncate_to_almost_power(v, base, 2)
        assert dist < 1e-12
        assert abs(abs(np.vdot(out.vec, v.vec)) - 1.0) < 1e-12

    def test_power_state_any_r(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = opalg.pure_power(base, 4)
        out, dist = symmetry.truncate_to_almost_power(v, base, 0)
        assert dist < 1e-12

    def test_pure_distance_formula(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = symmetry.random_almost_power(RNG, base, 4, 2)
        out, dist = symmetry.truncate_to_almost_power(v, base, 1)
        want = opalg.trace_norm_mat(np.outer(v.vec, v.vec.conj())
                                    - np.outer(out.vec, out.vec.conj()))
        assert abs(dist - want) < 1e-9

    def test_rejects_asymmetric(self):
        v = rand.random_pure(RNG, SystemShape((2, 2)))
        base = rand.random_pure(RNG, SystemShape((2,)))
        with pytest.raises(NotPermutationInvariant):
            symmetry.truncate_to_almost_power(v, base, 1)


class TestPurification:
    def test_iid_overlap_one(self):
        rho = rand.random_density(RNG, SystemShape((2,)))
        power = opalg.DensityMatrix(opalg.tensor_power(rho.op, 3))
        pair = symmetry.perm_invariant_purification(rho, power)
        assert abs(pair.overlap - 1.0) < 1e-9

    def test_overlap_equals_fidelity_random(self):
        for _ in range(4):
            rho = rand.random_density(RNG, SystemShape((2,)))
            rho_n = rand.random_perm_invariant_density(RNG, 2, 3)
            pair = symmetry.perm_invariant_purification(rho, rho_n)
            want = opalg.fidelity(rho_n.op, opalg.tensor_power(rho.op, 3))
            assert abs(pair.overlap - want) < 1e-6

    def test_pure_base_state(self):
        v = rand.random_pure(RNG, SystemShape((2,)))
        rho_n = rand.random_perm_invariant_density(RNG, 2, 3)
        pair = symmetry.perm_invariant_purification(v.density(), rho_n)
        want = opalg.fidelity(rho_n.op, opalg.tensor_power(v.projector(), 3))
        assert abs(pair.overlap - want) < 1e-8

    def test_purification_is_symmetric(self):
        rho = rand.random_density(RNG, SystemShape((2,)))
        rho_n = rand.random_perm_invariant_density(RNG, 2, 3)
        pair = symmetry.perm_invariant_purification(rho, rho_n)
        assert symmetry.sym_residual(pair.rhoN_pur) < 1e-10

    def test_rejects_non_invariant(self):
        rho = rand.random_density(RNG, SystemShape((2,)))
        rho_n = rand.random_density(RNG, SystemShape((2, 2, 2)))
        with pytest.raises(NotPermutationInvariant):
            symmetry.perm_invariant_purification(rho, rho_n)


class TestConditionedState:
    def test_iid_collapses_to_power(self):
        rho = rand.random_density(RNG, SystemShape((2,)))
        power = opalg.DensityMatrix(opalg.tensor_power(rho.op, 3))
        pair = symmetry.perm_invariant_purification(rho, power)
        cond, cert = symmetry.conditioned_state(pair.rhoN_pur, pair.rho_pur, 2)
        assert cert.passed
        assert abs(abs(np.vdot(cond.vec, pair.rho_pur.vec)) - 1.0) < 1e-9

    def test_m_zero_identity(self):
        rho = rand.random_density(RNG, SystemShape((2,)))
        rho_n = rand.random_perm_invariant_density(RNG, 2, 3)
        pair = symmetry.perm_invariant_purification(rho, rho_n)
        cond, cert = symmetry.conditioned_state(pair.rhoN_pur, pair.rho_pur, 0)
        assert_allclose(cond.vec, pair.rhoN_pur.vec)
        assert cert.passed

    def test_dominance_margin_random(self):
        for _ in range(5):
            rho = rand.random_density(RNG, SystemShape((2,)))
            rho_n = rand.random_perm_invariant_density(RNG, 2, 4)
            pair = symmetry.perm_invariant_purification(rho, rho_n)
            _, cert = symmetry.conditioned_state(pair.rhoN_pur,
                                                 pair.rho_pur, 1)
            assert cert.margin >= -1e-9

    def test_zero_overlap(self):
        base = opalg.pure(np.array([1.0, 0.0]))
        # two copies of a ray orthogonal to the base
        other = opalg.pure(np.array([0.0, 1.0]))
        v = opalg.pure_power(other, 2)
        with pytest.raises(ZeroOverlap):
            symmetry.conditioned_state(v, base, 1)


class TestPowerInequality:
    def test_r_zero_reduces(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = opalg.pure_power(base, 3)
        cert = symmetry.verify_power_inequality(v, base, 4, 1, 0)
        assert cert.passed

    @pytest.mark.parametrize("N,M,R", [(4, 1, 1), (6, 2, 2)])
    def test_random_instances(self, N, M, R):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = symmetry.random_almost_power(RNG, base, N - M, R)
        cert = symmetry.verify_power_inequality(v, base, N, M, R)
        assert cert.margin >= -1e-8

    def test_premise(self):
        base = rand.random_pure(RNG, SystemShape((2,)))
        v = symmetry.random_almost_power(RNG, base, 3, 1)
        with pytest.raises(PremiseFailed):
            symmetry.verify_power_inequality(v, base, 5, 2, 2)


def test_twirl_makes_invariant():
    a = rand.random_hermitian(RNG, SystemShape((2, 2, 2)))
    t = symmetry.twirl(a)
    assert symmetry.is_perm_invariant(t, 1e-12)
    assert abs(t.trace() - a.trace()) < 1e-12
