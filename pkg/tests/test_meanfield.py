"""Mean-field projections: closed form, numeric descent, and the penalized objective."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from alphapost.gaussians import GaussianDist, GridDensity, kl_gaussian
from alphapost.meanfield import (
    DiagonalGaussian,
    gmf_project_gaussian,
    gmf_project_numeric,
    maximize_penalized_objective,
    penalized_objective,
    variational_bvm_limit,
)
from alphapost.posteriors import ConjugatePrior, conjugate_alpha_posterior
from alphapost.regression import RegressionDGP, regression_likelihood, simulate

from oracles import coordinate_descent_diag_kl


def random_spd_target(rng, dim):
    a = rng.standard_normal((dim, dim))
    cov = a @ a.T + (0.4 + rng.uniform()) * np.eye(dim)
    return GaussianDist(rng.uniform(0.5, 1.5, size=dim), cov)


class TestDiagonalGaussian:
    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError, match="positive"):
            DiagonalGaussian([0.0], [0.0])

    def test_dist_round_trip(self):
        q = DiagonalGaussian([1.0, -1.0], [2.0, 0.5])
        assert_allclose(q.dist.cov, np.diag([2.0, 0.5]))


class TestClosedFormProjection:
    def test_diagonal_target_unchanged(self):
        target = GaussianDist([1.0, 2.0], np.diag([0.5, 3.0]))
        proj = gmf_project_gaussian(target)
        assert_allclose(proj.mean, target.mean)
        assert_allclose(proj.var, [0.5, 3.0], rtol=1e-12)

    def test_correlated_example_against_coordinate_descent(self):
        # Precision of [[2,1],[1,2]] is (1/3)[[2,-1],[-1,2]], so both
        # projected variances are 3/2; the numerical oracle agrees.
        target = GaussianDist([0.7, -0.4], [[2.0, 1.0], [1.0, 2.0]])
        proj = gmf_project_gaussian(target)
        assert_allclose(proj.var, [1.5, 1.5], rtol=1e-12)
        mean, var = coordinate_descent_diag_kl(
            lambda m, v: kl_gaussian(GaussianDist(m, np.diag(v)), target),
            target.mean,
            np.diag(target.cov),
            sweeps=40,
        )
        assert_allclose(mean, proj.mean, atol=1e-7)
        assert_allclose(var, proj.var, atol=1e-6)

    def test_variance_understatement(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            dim = int(rng.integers(2, 6))
            target = random_spd_target(rng, dim)
            proj = gmf_project_gaussian(target)
            assert np.all(proj.var <= np.diag(target.cov) + 1e-12)

    def test_perturbing_solution_increases_kl(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            dim = int(rng.integers(2, 6))
            target = random_spd_target(rng, dim)
            proj = gmf_project_gaussian(target)
            base = kl_gaussian(proj.dist, target)
            for j in range(dim):
                for factor in (0.99, 1.01):
                    mean = proj.mean.copy()
                    mean[j] *= factor
                    assert kl_gaussian(GaussianDist(mean, np.diag(proj.var)), target) > base
                    var = proj.var.copy()
                    var[j] *= factor
                    assert kl_gaussian(GaussianDist(proj.mean, np.diag(var)), target) > base

    def test_trace_inequality_equality_iff_diagonal(self):
        rng = np.random.default_rng(23)
        for _ in range(500):
            dim = int(rng.integers(2, 6))
            v = random_spd_target(rng, dim).cov
            trace = np.trace(np.diag(np.diag(v)) @ np.linalg.inv(v))
            assert trace >= dim - 1e-10
        v = np.diag([0.5, 2.0, 1.0])
        assert_allclose(np.trace(np.diag(np.diag(v)) @ np.linalg.inv(v)), 3.0, rtol=1e-12)


class TestNumericProjection:
    def test_gridded_gaussian_matches_closed_form_1d(self):
        target = GaussianDist(1.0, 2.0)
        grid = GridDensity.from_gaussian(target, [np.linspace(-20, 22, 4001)])
        proj = gmf_project_numeric(grid)
        closed = gmf_project_gaussian(target)
        assert_allclose(proj.mean, closed.mean, atol=1e-5)
        assert_allclose(proj.var, closed.var, atol=1e-5)

    def test_gridded_gaussian_matches_closed_form_2d(self):
        target = GaussianDist([0.5, -0.3], [[2.0, 1.0], [1.0, 2.0]])
        hw = 16.0 * np.sqrt(2.0)
        axes = [
            np.linspace(0.5 - hw, 0.5 + hw, 401),
            np.linspace(-0.3 - hw, -0.3 + hw, 401),
        ]
        proj = gmf_project_numeric(GridDensity.from_gaussian(target, axes))
        closed = gmf_project_gaussian(target)
        assert_allclose(proj.mean, closed.mean, atol=1e-5)
        assert_allclose(proj.var, closed.var, atol=1e-5)

    def test_far_init_reaches_same_optimum(self):
        target = GaussianDist(1.0, 2.0)
        grid = GridDensity.from_gaussian(target, [np.linspace(-30, 32, 6001)])
        default = gmf_project_numeric(grid)
        far = gmf_project_numeric(grid, DiagonalGaussian([1.0 + 5.0 * np.sqrt(2.0)], [2.0]))
        assert_allclose(far.mean, default.mean, atol=1e-6)
        assert_allclose(far.var, default.var, atol=1e-6)

    def test_laplace_posterior_near_limit_at_large_n(self):
        rng = np.random.default_rng(31)
        n = 5000
        x = rng.standard_normal(n)
        from alphapost.experiments import laplace_log_prior, location_likelihood
        from alphapost.posteriors import default_grid_axes, grid_alpha_posterior

        theta_hat = float(np.mean(x))
        axes = default_grid_axes([theta_hat], [[1.0]], n, 1.0, 2001, scale=14.0)
        post = grid_alpha_posterior(location_likelihood(x), laplace_log_prior(), 1.0, axes)
        proj = gmf_project_numeric(post)
        limit = variational_bvm_limit([theta_hat], [[1.0]], n, 1.0)
        assert abs(proj.mean[0] - limit.mean[0]) < 1e-3
        assert abs(proj.var[0] - limit.var[0]) < 1e-3

    def test_nodes_outside_support_rejected(self):
        target = GaussianDist(0.0, 1.0)
        grid = GridDensity.from_gaussian(target, [np.linspace(-6, 6, 1001)])
        with pytest.raises(ValueError, match="support"):
            gmf_project_numeric(grid, DiagonalGaussian([5.0], [1.0]))

    def test_dimension_above_two_rejected(self):
        target = GaussianDist(0.0, 1.0)
        grid = GridDensity.from_gaussian(target, [np.linspace(-8, 8, 1001)])
        with pytest.raises(ValueError, match="dimension"):
            gmf_project_numeric(grid, DiagonalGaussian([0.0, 0.0], [1.0, 1.0]))


class TestVariationalBvmLimit:
    def test_diagonal_curvature_matches_projected_limit(self):
        from alphapost.posteriors import gaussian_bvm_limit

        v = np.diag([2.0, 0.5])
        lim = variational_bvm_limit([0.1, 0.2], v, 50, 0.5)
        projected = gmf_project_gaussian(gaussian_bvm_limit([0.1, 0.2], v, 50, 0.5))
        assert_allclose(lim.mean, projected.mean)
        assert_allclose(lim.var, projected.var, rtol=1e-12)

    def test_correlated_curvature_value(self):
        lim = variational_bvm_limit([0.0, 0.0], [[2.0, 1.0], [1.0, 2.0]], 100, 1.0)
        assert_allclose(lim.var, [1.0 / 200.0, 1.0 / 200.0], rtol=1e-12)

    def test_half_alpha_doubles_variances(self):
        v = [[2.0, 1.0], [1.0, 2.0]]
        assert_allclose(
            variational_bvm_limit([0.0, 0.0], v, 100, 0.5).var,
            2.0 * variational_bvm_limit([0.0, 0.0], v, 100, 1.0).var,
            rtol=1e-12,
        )


def conjugate_1d_setup(seed=5, n=200, alpha=1.0):
    dgp = RegressionDGP(
        theta0=[1.0], gamma0=[1.0], sigma_eps=1.0, cov_WW=[[1.0]], cov_WZ=[[0.5]], cov_ZZ=[[1.0]]
    )
    ds = simulate(dgp, n, seed)
    prior = ConjugatePrior([0.0], [[1.0]])
    lik = regression_likelihood(ds, dgp.sigma_u)
    log_prior = prior.log_density_fn(dgp.sigma_u)
    post = conjugate_alpha_posterior(ds.W, ds.Y, prior, dgp.sigma_u, alpha)
    return lik, log_prior, post


class TestPenalizedObjective:
    def test_argmax_equals_kl_projection(self):
        from alphapost.posteriors import grid_alpha_posterior

        for alpha in (0.25, 0.5, 1.0, 2.0):
            lik, log_prior, post = conjugate_1d_setup(alpha=alpha)
            sd = float(np.sqrt(post.cov[0, 0]))
            axes = [np.linspace(post.mean[0] - 14 * sd, post.mean[0] + 14 * sd, 2001)]
            grid_post = grid_alpha_posterior(lik, log_prior, alpha, axes)
            projected = gmf_project_numeric(grid_post)
            init = DiagonalGaussian(post.mean + 0.5 * sd, np.diag(post.cov) * 1.5)
            maximized = maximize_penalized_objective(lik, log_prior, alpha, init)
            assert_allclose(maximized.mean, projected.mean, atol=1e-5)
            assert_allclose(maximized.var, projected.var, atol=1e-5)

    def test_objective_gap_equals_scaled_kl_gap(self):
        # Obj(q1) - Obj(q2) = -(1/alpha) (KL(q1||post) - KL(q2||post)); the
        # conjugate posterior is Gaussian so the right side is exact.
        alpha = 0.5
        lik, log_prior, post = conjugate_1d_setup(alpha=alpha)
        q1 = DiagonalGaussian(post.mean, np.diag(post.cov))
        q2 = DiagonalGaussian(post.mean + 0.03, np.diag(post.cov) * 1.3)
        gap = penalized_objective(q1, lik, log_prior, alpha) - penalized_objective(
            q2, lik, log_prior, alpha
        )
        kl_gap = kl_gaussian(q1.dist, post) - kl_gaussian(q2.dist, post)
        assert abs(gap + kl_gap / alpha) < 1e-6

    def test_large_alpha_tracks_likelihood_argmax(self):
        alpha = 500.0
        lik, log_prior, post = conjugate_1d_setup(alpha=1.0)
        sd = float(np.sqrt(post.cov[0, 0]))
        axes = np.linspace(post.mean[0] - 10 * sd, post.mean[0] + 10 * sd, 2001)
        lik_argmax = axes[int(np.argmax(lik(axes[:, None])))]
        init = DiagonalGaussian(post.mean, np.diag(post.cov))
        maximized = maximize_penalized_objective(lik, log_prior, alpha, init)
        assert abs(maximized.mean[0] - lik_argmax) <= axes[1] - axes[0]

    def test_rejects_nonpositive_alpha(self):
        lik, log_prior, _ = conjugate_1d_setup()
        q = DiagonalGaussian([1.0], [0.01])
        with pytest.raises(ValueError, match="alpha"):
            penalized_objective(q, lik, log_prior, 0.0)

    def test_rejects_dimension_mismatch(self):
        lik, log_prior, _ = conjugate_1d_setup()
        q = DiagonalGaussian([1.0, 0.0], [0.01, 0.01])
        with pytest.raises(ValueError, match="dimension"):
            penalized_objective(q, lik, log_prior, 1.0)
