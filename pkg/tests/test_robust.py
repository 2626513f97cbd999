"""Truncated-loss surrogate, weight updates, and the robust loop."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapelift.bench import SynthConfig, generate, reconstruct
from shapelift.model import geodesic_rotation_error
from shapelift.robust import (
    GncSettings,
    gnc_objective,
    gnc_surrogate,
    residuals,
    weight_update,
)

from helpers import make_instance

positive_mu = st.floats(1e-4, 1e4)
positive_cbar = st.floats(1e-3, 1e3)


class TestResiduals:
    def test_zero_at_generating_parameters(self):
        rng = np.random.default_rng(0)
        model, obs, c, rot, t = make_instance(2, 8, rng)
        r = residuals(model, obs, c, rot, t)
        assert np.all(r == 0.0)

    def test_single_displacement_measured_exactly(self):
        rng = np.random.default_rng(1)
        model, obs, c, rot, t = make_instance(1, 6, rng)
        z = obs.landmarks.copy()
        direction = np.array([0.6, 0.8])  # unit vector
        z[3] += 0.37 * direction
        obs2 = type(obs)(landmarks=z, weights=obs.weights)
        r = residuals(model, obs2, c, rot, t)
        assert r[3] == pytest.approx(0.37, abs=1e-12)
        mask = np.ones(6, dtype=bool)
        mask[3] = False
        assert np.all(r[mask] < 1e-12)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(2)
        model, obs, c, rot, t = make_instance(3, 7, rng, noise=0.2)
        r = residuals(model, obs, c, rot, t)
        for i in range(7):
            pt = sum(c[k] * model.bases[k, :, i] for k in range(3))
            pred = (rot @ pt)[:2] + t
            assert r[i] == pytest.approx(
                np.linalg.norm(obs.landmarks[i] - pred), abs=1e-12)


class TestSurrogate:
    def test_zero_residual(self):
        assert gnc_surrogate(0.0, 0.5, 1.0) == 0.0

    def test_saturates_at_cutoff_squared(self):
        # far outside the transition band the loss is flat at cbar^2
        assert gnc_surrogate(100.0, 1.0, 2.0) == pytest.approx(4.0)

    def test_large_mu_limit_is_truncated_quadratic(self):
        cbars = [0.1, 1.0, 2.5]
        for cbar in cbars:
            r = np.linspace(0.0, 3.0 * cbar, 500)
            rho = gnc_surrogate(r, 1e6, cbar)
            target = np.minimum(r**2, cbar**2)
            assert np.abs(rho - target).max() < 1e-4

    def test_small_mu_is_convex_on_grid(self):
        for mu in (1e-4, 1e-3):
            r = np.linspace(0.0, 5.0, 2001)
            rho = gnc_surrogate(r, mu, 1.0)
            second = rho[2:] - 2 * rho[1:-1] + rho[:-2]
            assert second.min() >= -1e-6

    @settings(deadline=None)
    @given(st.floats(0, 100), positive_mu, positive_cbar)
    def test_bounded_by_cutoff(self, r, mu, cbar):
        rho = float(gnc_surrogate(r, mu, cbar))
        assert -1e-12 <= rho <= cbar**2 * (1 + 1e-9)


class TestWeightUpdate:
    def test_zero_residual_gets_full_weight(self):
        assert weight_update(0.0, 0.5, 1.0) == 1.0

    def test_reference_point(self):
        # mu = cbar = r = 1 sits inside the transition band
        w = float(weight_update(1.0, 1.0, 1.0))
        assert w == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-12)

    def test_branch_edges_are_continuous(self):
        # evaluating the middle-branch formula exactly at the two branch
        # edges must reproduce the outer values (1 and 0)
        rng = np.random.default_rng(3)
        for _ in range(200):
            mu = 10.0 ** rng.uniform(-4, 4)
            cbar = 10.0 ** rng.uniform(-3, 3)
            r_lo = cbar * np.sqrt(mu / (mu + 1.0))
            r_hi = cbar * np.sqrt((mu + 1.0) / mu)
            mid_lo = cbar / r_lo * np.sqrt(mu * (mu + 1.0)) - mu
            mid_hi = cbar / r_hi * np.sqrt(mu * (mu + 1.0)) - mu
            assert abs(mid_lo - 1.0) < 1e-10 * (1.0 + mu)
            assert abs(mid_hi) < 1e-10 * (1.0 + mu)

    def test_matches_grid_minimizer(self):
        # the closed form must agree with brute-force minimization of
        # w r^2 + mu (1 - w)/(mu + w) cbar^2 over a dense w grid
        rng = np.random.default_rng(4)
        grid = np.linspace(0.0, 1.0, 20001)
        for _ in range(200):
            mu = 10.0 ** rng.uniform(-2, 2)
            cbar = 10.0 ** rng.uniform(-1, 1)
            r = cbar * 10.0 ** rng.uniform(-1, 1)
            vals = grid * r**2 + mu * (1.0 - grid) / (mu + grid) * cbar**2
            w_grid = grid[np.argmin(vals)]
            w_closed = float(weight_update(r, mu, cbar))
            assert abs(w_closed - w_grid) < 1e-4

    @settings(deadline=None)
    @given(st.floats(0, 50), positive_mu, positive_cbar)
    def test_weight_in_unit_interval(self, r, mu, cbar):
        w = float(weight_update(r, mu, cbar))
        assert 0.0 <= w <= 1.0

    @settings(deadline=None)
    @given(st.floats(0, 20), st.floats(1e-6, 20), positive_mu, positive_cbar)
    def test_nonincreasing_in_residual(self, r, dr, mu, cbar):
        w1 = float(weight_update(r, mu, cbar))
        w2 = float(weight_update(r + dr, mu, cbar))
        assert w2 <= w1 + 1e-12


class TestGncObjective:
    def test_full_weights_give_least_squares(self):
        res = np.array([0.1, 0.2, 0.3])
        c = np.array([0.5, 0.25])
        f = gnc_objective(res, np.ones(3), mu=0.7, cbar=1.0,
                          alpha=0.1, coeffs=c)
        assert f == pytest.approx(float(res @ res) + 0.1 * 0.75)

    def test_zero_weights_pay_cutoff_per_point(self):
        res = np.array([5.0, 7.0])
        f = gnc_objective(res, np.zeros(2), mu=0.7, cbar=2.0)
        assert f == pytest.approx(2 * 4.0)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(5)
        res = rng.uniform(0, 3, 10)
        w = rng.uniform(0, 1, 10)
        mu, cbar = 0.3, 1.5
        direct = sum(w[i] * res[i] ** 2
                     + mu * (1 - w[i]) / (mu + w[i]) * cbar**2
                     for i in range(10))
        assert gnc_objective(res, w, mu, cbar) == pytest.approx(direct)


class TestSettings:
    def test_cbar_required_positive(self):
        with pytest.raises(ValueError):
            GncSettings(cbar=0.0)
        with pytest.raises(ValueError):
            GncSettings(cbar=-1.0)

    def test_defaults(self):
        s = GncSettings(cbar=0.1)
        assert s.mu0 == pytest.approx(1e-4)
        assert s.mu_factor == 2.0
        assert s.alpha == 0.0


class TestRobustLoop:
    def test_outlier_free_matches_plain_solve(self):
        cfg = SynthConfig(k=2, n=20, noise=0.01, alpha=0.0, seed=3)
        model, obs, truth = generate(cfg)
        plain = reconstruct(model, obs, alpha=0.0)
        robust = reconstruct(model, obs, alpha=0.0, robust=True, cbar=0.1)
        assert np.abs(plain.coeffs - robust.coeffs).max() < 1e-4
        assert geodesic_rotation_error(
            plain.pose.rotation, robust.pose.rotation) < 0.1
        assert np.all(robust.weights > 0.99)

    def test_half_outliers_classified_and_certified(self):
        cfg = SynthConfig(k=3, n=50, noise=0.01, outlier_rate=0.5,
                          alpha=0.0, seed=0)
        model, obs, truth = generate(cfg)
        rec = reconstruct(model, obs, alpha=0.0, robust=True,
                          cbar=5 * np.sqrt(2) * 0.01)
        assert rec.gnc.status == "converged"
        assert rec.weights[truth.outlier_mask].max() < 0.1
        assert rec.weights[~truth.outlier_mask].min() > 0.9
        assert geodesic_rotation_error(
            rec.pose.rotation, truth.rotation) < 2.0

    def test_mu_schedule_and_history(self):
        cfg = SynthConfig(k=2, n=20, noise=0.01, alpha=0.0, seed=3)
        model, obs, truth = generate(cfg)
        rec = reconstruct(model, obs, alpha=0.0, robust=True, cbar=0.1)
        state = rec.gnc
        assert state.mu == pytest.approx(
            1e-4 * 2.0 ** (state.tau - 1), rel=1e-12)
        assert len(state.objective_history) == state.tau
        assert np.all(np.isfinite(state.objective_history))

    def test_clean_residuals_converge_immediately(self):
        # noise-free data: the first solve nails every point, weights all
        # stay 1 and the objective cannot change
        cfg = SynthConfig(k=1, n=20, noise=0.0, alpha=0.0, seed=1)
        model, obs, truth = generate(cfg)
        rec = reconstruct(model, obs, alpha=0.0, robust=True, cbar=0.1)
        assert rec.gnc.status == "converged"
        assert rec.gnc.tau == 2
        assert np.all(rec.weights == 1.0)

    def test_tiny_cutoff_collapses_weights(self):
        # with an absurd cutoff every point looks like an outlier; the
        # loop must stop, flag the collapse, and refuse the certificate
        cfg = SynthConfig(k=1, n=8, noise=0.05, alpha=0.0, seed=2)
        model, obs, truth = generate(cfg)
        rec = reconstruct(model, obs, alpha=0.0, robust=True, cbar=1e-9)
        assert rec.gnc.status == "weights_collapsed"
        assert not rec.certified
