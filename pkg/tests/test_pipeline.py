import csv
import math

import numpy as np
import pytest

from qstein import opalg, pipeline, rand, symmetry
from qstein.entropy import binary_entropy, relative_entropy
from qstein.errors import (CertificateFailed, PremiseFailed,
                           PremiseOutOfInterval)
from qstein.freesets import DiagonalFamily, SingletonIIDFamily
from qstein.opalg import DensityMatrix, HermitianOperator, SystemShape
from qstein.optim import SolverSettings

RNG = np.random.default_rng(424)
SET = SolverSettings(max_iters=256, tol=1e-7, seed=0)
H08 = binary_entropy(0.8)


def coherence_qubit(p=0.8):
    v = np.array([math.sqrt(p), math.sqrt(1 - p)])
    return opalg.density(np.outer(v, v))


class TestSchedule:
    @pytest.mark.parametrize("n,want", [(64, (16, 16)), (8, (4, 2)),
                                        (4, (3, 0)), (6, (4, 1))])
    def test_values(self, n, want):
        s = pipeline.mr_schedule(n)
        assert (s.M, s.R) == want
        assert s.N - s.M >= 2 * s.R

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            pipeline.mr_schedule(3)

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            pipeline.Schedule(4, 2, 2)

    def test_epsilon_formula(self):
        # direct evaluation at (N=8, M=R=4, y=1, mu=1/2)
        mu, y, N, M, R = 0.5, 1.0, 8, 4, 4
        a = 2.0 * math.sqrt(2.0) / (mu * math.exp(M * R / (2.0 * N)))
        b = 2.0 * math.sqrt(2.0 * R) / N
        want = 2.0 * mu ** 3 / 2.0 ** (y * N) * (a + b)
        got = pipeline.epsilon_schedule(N, M, R, y, mu)
        assert abs(got - want) < 1e-18
        assert abs(got - 2.72e-3) < 5e-6


class TestDominatedState:
    def test_delta_zero(self):
        rho = rand.random_density(RNG, SystemShape((3,)))
        x = HermitianOperator(rho.shape, rho.mat * 1.0)
        zero = HermitianOperator(rho.shape, np.zeros((3, 3)))
        tilde, cert = pipeline.dominated_state(rho, x, zero)
        assert cert.margin >= -1e-10
        assert np.abs(tilde.mat - rho.mat).max() < 1e-9

    def test_commuting_case(self):
        shape = SystemShape((2,))
        rho = opalg.maximally_mixed(shape)
        x = HermitianOperator(shape, 0.5 * np.eye(2))
        delta = HermitianOperator(shape, 0.05 * np.eye(2))
        tilde, cert = pipeline.dominated_state(rho, x, delta)
        assert cert.passed
        assert opalg.fidelity(tilde.op, rho.op) >= 0.9 - 1e-10

    def test_premise_violated(self):
        shape = SystemShape((2,))
        rho = opalg.density(np.diag([1.0, 0.0]))
        x = HermitianOperator(shape, np.diag([0.1, 1.0]))
        delta = HermitianOperator(shape, 0.2 * np.eye(2))
        with pytest.raises(PremiseFailed):
            pipeline.dominated_state(rho, x, delta)


class TestStep1:
    def test_free_state_premise_fails(self):
        free = opalg.density(np.diag([0.5, 0.5]))
        with pytest.raises(PremiseOutOfInterval):
            pipeline.step1(free, 0.5, 4, DiagonalFamily(2, 1), SET)

    def test_rate_too_high_premise_fails(self):
        with pytest.raises(PremiseOutOfInterval):
            pipeline.step1(coherence_qubit(), 5.0, 4, DiagonalFamily(2, 1),
                           SET)

    def test_coherence_instance(self):
        trace = pipeline.step1(coherence_qubit(), H08, 4,
                               DiagonalFamily(2, 1), SET)
        assert 0.7 < trace.mu_N < 0.9
        assert symmetry.is_perm_invariant(trace.sigma_N.op, 1e-8)
        assert symmetry.is_perm_invariant(trace.rho_N.op, 1e-8)
        assert trace.all_passed


def synthetic_iid_trace(p=0.8, N=4, y=1.2):
    """Trace where rho_N is exactly IID; the chain collapses."""
    rho = coherence_qubit(p)
    fam = DiagonalFamily(2, 1)
    power = opalg.tensor_power(rho.op, N)
    sigma = fam.at_copies(N).full_rank_witness()
    # mu chosen so the step-1 dominance holds for the witness
    lam = float(np.linalg.eigvalsh(
        np.linalg.inv(opalg.sqrt_psd(sigma.mat) + 0j)
        @ power.mat @ np.linalg.inv(opalg.sqrt_psd(sigma.mat)))[-1])
    mu = min(0.9, 2.0 ** (y * N) / lam * 0.9)
    trace = pipeline.PipelineTrace(rho=rho, y=y, N=N, family=fam, mu_N=mu,
                                   sigma_N=sigma,
                                   rho_N=DensityMatrix(power))
    trace.overlap = 1.0
    return trace


class TestStep2:
    def test_iid_synthetic_chain_collapses(self):
        trace = synthetic_iid_trace()
        sched = pipeline.mr_schedule(4)
        pipeline.step2(trace, sched)
        assert trace.all_passed
        final = [c for c in trace.certificates
                 if c.name == "assembled power-state dominance"][0]
        assert final.margin > 1.0  # large margin in the collapsed case

    def test_epsilon_matches_formula(self):
        trace = pipeline.step1(coherence_qubit(), H08, 5,
                               DiagonalFamily(2, 1), SET)
        sched = pipeline.mr_schedule(5)
        pipeline.step2(trace, sched)
        want = pipeline.epsilon_schedule(5, sched.M, sched.R, H08, trace.mu_N)
        assert abs(trace.eps_N - want) < 1e-15
        assert abs(trace.c_N - trace.eps_N * 2.0 ** (H08 * 5)
                   / (2.0 * trace.mu_N)) < 1e-15

    def test_full_run_n5(self):
        trace = pipeline.run_direct_part(coherence_qubit(), H08, 5,
                                         DiagonalFamily(2, 1), SET)
        assert trace.all_passed
        assert trace.schedule.reduced_copies == 1
        names = [c.name for c in trace.certificates]
        assert "relative-entropy budget" in names
        assert "near-free distance" in names

    def test_reduced_mode_n7(self):
        settings = SolverSettings(max_iters=160, tol=1e-6, seed=0)
        trace = pipeline.run_direct_part(coherence_qubit(), H08, 7,
                                         DiagonalFamily(2, 1), settings)
        assert trace.reduced_mode
        assert trace.all_passed


class TestRelentCertificate:
    def test_iid_additivity_case(self):
        trace = synthetic_iid_trace()
        sched = pipeline.mr_schedule(4)
        pipeline.step2(trace, sched)
        cert = [c for c in trace.certificates
                if c.name == "relative-entropy budget"]
        if not cert:
            cert = [pipeline.relent_bound_certificate(trace, sched)]
        assert cert[0].passed

    def test_corrupted_sigma_tilde_fails(self):
        trace = pipeline.step1(coherence_qubit(), H08, 4,
                               DiagonalFamily(2, 1), SET)
        sched = pipeline.mr_schedule(4)
        pipeline.step2(trace, sched)
        # shrink the support of sigma_tilde: relative entropy diverges
        n_red = sched.reduced_copies
        trace.sigma_tilde = opalg.density(np.diag([1.0, 0.0]),
                                          (2,) * n_red)
        with pytest.raises(CertificateFailed):
            pipeline.relent_bound_certificate(trace, sched)


class TestAsymFreeCertificate:
    def test_free_marginal_construction(self):
        trace = pipeline.run_direct_part(coherence_qubit(), H08, 5,
                                         DiagonalFamily(2, 1), SET)
        cert = [c for c in trace.certificates
                if c.name == "near-free distance"][0]
        assert cert.passed

    def test_resourceful_sigma_tilde_fails(self):
        trace = pipeline.step1(coherence_qubit(), H08, 4,
                               DiagonalFamily(2, 1), SET)
        sched = pipeline.mr_schedule(4)
        pipeline.step2(trace, sched)
        n_red = sched.reduced_copies
        trace.eps_N = 1e-3
        plus = np.ones((2, 2)) / 2.0
        mat = plus
        for _ in range(n_red - 1):
            mat = np.kron(mat, plus)
        trace.sigma_tilde = opalg.density(mat, (2,) * n_red)
        with pytest.raises(CertificateFailed):
            pipeline.asym_free_certificate(trace, sched,
                                           DiagonalFamily(2, n_red), SET)


class TestSandwich:
    def test_upper_bound_is_set_inclusion(self):
        rep = pipeline.finite_n_sandwich(coherence_qubit(),
                                         DiagonalFamily(2, 3), 1e-4, SET)
        assert rep.eps_value <= rep.upper_bound + 1e-12
        assert rep.certificate.passed

    def test_degenerate_eps_collapse(self):
        rep = pipeline.finite_n_sandwich(coherence_qubit(),
                                         DiagonalFamily(2, 3), 1e-12, SET)
        assert abs(rep.eps_value - rep.free_value) < 1e-6

    def test_lower_bound_formula(self):
        eps = 1e-4
        fam = DiagonalFamily(2, 3)
        rep = pipeline.finite_n_sandwich(coherence_qubit(), fam, eps, SET)
        lam = fam.full_rank_witness().lambda_min() ** (1.0 / 3.0)
        log_term = math.log2((1 + 2 * eps) / eps) + 3 * math.log2(1 / lam)
        cont = 3 * log_term ** 2 * math.sqrt(eps) / (
            1 - eps * lam ** 3 / (2 * (1 + 2 * eps)))
        penalty = (1 + 2 * eps) * cont + 2 * eps * (3 * math.log2(1 / lam) + 1)
        want_lower = (rep.free_value * 3 - penalty) / 3
        assert abs(rep.lower_bound - want_lower) < 1e-9
        assert rep.eps_value >= rep.lower_bound - 1e-9


class TestTraceSerialization:
    def test_save_trace(self, tmp_path):
        trace = pipeline.run_direct_part(coherence_qubit(), H08, 4,
                                         DiagonalFamily(2, 1), SET)
        out = tmp_path / "trace"
        pipeline.save_trace(trace, str(out))
        assert (out / "sigma_N.op").exists()
        assert (out / "sigma_tilde.op").exists()
        back = opalg.load_density(str(out / "sigma_N.op"))
        assert np.array_equal(back.mat, trace.sigma_N.mat)
        with open(out / "certificates.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(trace.certificates)
        assert all(r["pass"] == "true" for r in rows)
