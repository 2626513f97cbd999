"""Candidate extraction, projection, and the optimality certificate."""

import numpy as np
import pytest

from shapelift.bench import SynthConfig, generate, reconstruct
from shapelift.certify import (
    Certificate,
    CertifySettings,
    ExtractionDegenerateError,
    ProjectionDegenerateError,
    certify,
    extract_candidate,
    project_coeffs,
    project_rotation,
    solve_centered,
)
from shapelift.model import geodesic_rotation_error
from shapelift.preprocess import eliminate_translation, normalize
from shapelift.relax import build_basis
from shapelift.sdp import SdpSettings

from helpers import eval_monomials, random_centered, random_rotation, x_vector


def rank_one_gram(k, coeffs, rotation):
    """PSD matrix whose one-dimensional null space is the lifted point."""
    spec = build_basis(k, "reduced2")
    v = eval_monomials(spec.gram, x_vector(coeffs, rotation))
    n = len(v)
    return np.eye(n) - np.outer(v, v) / float(v @ v), v


class TestExtraction:
    def test_recovers_lifted_point(self):
        rng = np.random.default_rng(0)
        c_true = np.array([0.3, 0.8])
        rot_true = random_rotation(rng)
        gram, _ = rank_one_gram(2, c_true, rot_true)
        c_raw, r_raw = extract_candidate(gram, 2)
        assert np.allclose(c_raw, c_true, atol=1e-10)
        assert np.allclose(r_raw, rot_true.reshape(9, order="F"), atol=1e-10)

    def test_identity_gram_gives_origin_candidate(self):
        # full-rank gram: nothing to extract, but the call must not raise
        c_raw, r_raw = extract_candidate(np.eye(30), 2)
        assert np.allclose(c_raw, 0.0)
        assert np.allclose(r_raw, 0.0)

    def test_null_vector_without_constant_part_rejected(self):
        n = 20
        v = np.zeros(n)
        v[1] = 1.0  # a pure c direction, no constant component
        gram = np.eye(n) - np.outer(v, v)
        with pytest.raises(ExtractionDegenerateError):
            extract_candidate(gram, 1)


class TestProjection:
    def test_coeff_clamping(self):
        out = project_coeffs(np.array([1.2, -0.1, 0.37]))
        assert out.tolist() == [1.0, 0.0, 0.37]

    def test_exact_rotation_unchanged(self):
        rng = np.random.default_rng(1)
        rot = random_rotation(rng)
        back = project_rotation(rot.reshape(9, order="F"))
        assert np.allclose(back, rot, atol=1e-12)

    def test_scaling_removed(self):
        rng = np.random.default_rng(2)
        rot = random_rotation(rng)
        back = project_rotation(1.1 * rot.reshape(9, order="F"))
        assert np.allclose(back, rot, atol=1e-12)

    def test_output_is_orthonormal_right_handed(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            r_raw = random_rotation(rng).reshape(9, order="F")
            r_raw = r_raw + 0.05 * rng.standard_normal(9)
            rot = project_rotation(r_raw)
            assert np.linalg.norm(rot.T @ rot - np.eye(3)) < 1e-12
            assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-12)

    def test_beats_random_search(self):
        # the projection must be at least as close (Frobenius) as the best
        # of ten thousand random rotations
        from scipy.spatial.transform import Rotation

        rng = np.random.default_rng(4)
        noisy = random_rotation(rng) + 0.1 * rng.standard_normal((3, 3))
        best = project_rotation(noisy.reshape(9, order="F"))
        d_proj = np.linalg.norm(noisy - best)
        samples = Rotation.random(10000, random_state=5).as_matrix()
        d_rand = np.linalg.norm(samples - noisy, axis=(1, 2)).min()
        assert d_proj <= d_rand + 1e-12

    def test_rank_deficient_rejected(self):
        with pytest.raises(ProjectionDegenerateError):
            project_rotation(np.zeros(9))


class TestCertificate:
    def test_equal_bound_gives_zero_eta(self):
        gram, _ = rank_one_gram(1, np.array([0.5]), np.eye(3))
        cert = certify(2.0, 2.0, gram)
        assert cert.eta == 0.0
        assert cert.corank == 1
        assert cert.certified

    def test_bound_above_candidate_clamps(self):
        gram, _ = rank_one_gram(1, np.array([0.5]), np.eye(3))
        cert = certify(2.0 + 1e-9, 2.0, gram)
        assert cert.eta == 0.0
        assert cert.certified

    def test_full_rank_gram_not_certified(self):
        cert = certify(2.0, 2.0, np.eye(20))
        assert cert.corank == 0
        assert not cert.certified

    def test_corank_counts_relative_null_space(self):
        gram = np.diag([5.0, 1e-8, 1e-9, 1.0])
        cert = certify(1.0, 1.0, gram)
        assert cert.corank == 2
        assert not cert.certified

    def test_monotone_in_candidate_value(self):
        # improving the candidate (smaller f_hat) must never flip a
        # certified outcome back to uncertified
        gram, _ = rank_one_gram(1, np.array([0.5]), np.eye(3))
        gamma = 1.0
        statuses = []
        for f_hat in [10.0, 2.0, 1.001, 1.0000001, 1.0, 0.9]:
            statuses.append(certify(gamma, f_hat, gram).certified)
        for earlier, later in zip(statuses, statuses[1:]):
            assert later >= earlier

    def test_eta_threshold_configurable(self):
        gram, _ = rank_one_gram(1, np.array([0.5]), np.eye(3))
        loose = certify(1.0, 1.01, gram, CertifySettings(eta_tol=0.1))
        tight = certify(1.0, 1.01, gram, CertifySettings(eta_tol=1e-4))
        assert loose.certified
        assert not tight.certified


class TestSolveCentered:
    def test_noise_free_exact_recovery(self):
        # zero noise: the relaxation closes exactly, and the candidate is
        # the generating configuration. The relative gap eta degenerates
        # here (f_hat is at solver noise scale ~1e-10, so the ratio is
        # meaningless); the absolute gap is the meaningful check.
        for seed in (0, 1):
            cfg = SynthConfig(k=1, n=50, noise=0.0, alpha=0.0, seed=seed)
            model, obs, truth = generate(cfg)
            rec = reconstruct(model, obs, alpha=0.0,
                              sdp_settings=SdpSettings(tol=1e-10))
            assert np.abs(rec.coeffs - truth.coeffs).max() < 1e-5
            assert geodesic_rotation_error(
                rec.pose.rotation, truth.rotation) < 1e-3
            assert np.abs(rec.pose.translation).max() < 1e-5
            assert rec.corank == 1
            assert abs(rec.f_upper - rec.f_lower) < 1e-8

    def test_sparse_support_recovered(self):
        # two active bases out of five; the penalty should push the
        # inactive coefficients to (near) zero
        for seed in (0, 1, 2):
            cfg = SynthConfig(k=5, n=100, noise=0.01, sparse_support=2,
                              alpha=0.01, seed=seed)
            model, obs, truth = generate(cfg)
            rec = reconstruct(model, obs, alpha=0.01)
            assert rec.certified
            assert rec.coeffs[2:].max() <= 1e-3
            assert np.abs(rec.coeffs[:2] - truth.coeffs[:2]).max() <= 5e-3

    def test_sandwich_bound_on_solves(self):
        rng = np.random.default_rng(6)
        for k in (1, 2):
            prob, _, _ = random_centered(k, 20, rng, noise=0.02, alpha=0.05)
            rec = solve_centered(prob)
            assert rec.f_lower <= rec.f_upper + 1e-6

    def test_uncertified_is_normal_return(self):
        # a loose iteration budget leaves the gram far from corank 1;
        # the solve must still return a full reconstruction
        rng = np.random.default_rng(7)
        prob, _, _ = random_centered(1, 10, rng, noise=0.05)
        rec = solve_centered(prob, sdp_settings=SdpSettings(max_iter=4))
        assert not rec.certified
        assert rec.coeffs.shape == (1,)

    def test_certificate_matches_reported_fields(self):
        rng = np.random.default_rng(8)
        prob, _, _ = random_centered(2, 15, rng, noise=0.02)
        rec = solve_centered(prob)
        assert rec.eta >= 0.0
        assert rec.certified == (rec.corank == 1 and rec.eta <= 1e-3)
