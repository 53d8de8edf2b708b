"""Tempered (likelihood-power) posteriors and their Gaussian large-sample limits.

A tempered posterior raises the likelihood to a power ``alpha > 0`` before
multiplying by the prior.  Two constructions are provided:

* closed form for the conjugate Gaussian linear regression model,
* tabulation on a rectangular grid for generic low-dimensional models.

The Gaussian limit ``N(theta_hat_ml, V^{-1} / (alpha n))`` and concentration
probes around the (pseudo-)true parameter complete the module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .gaussians import GaussianDist, GridDensity, trapezoid_weights

__all__ = [
    "ConjugatePrior",
    "LikelihoodEvaluator",
    "AlphaPosteriorConjugate",
    "conjugate_alpha_posterior",
    "grid_alpha_posterior",
    "default_grid_axes",
    "gaussian_bvm_limit",
    "concentration_probability",
]


@dataclass(frozen=True)
class ConjugatePrior:
    """Gaussian prior ``N(mu_pi, sigma_u^2 * Sigma_pi^{-1})`` in precision-scale form.

    ``Sigma_pi`` is the precision-scale matrix: it must be symmetric positive
    semidefinite, and the all-zeros matrix encodes the flat-prior limit (the
    posterior then collapses to pure least squares for every ``alpha``).
    """

    mu_pi: np.ndarray
    Sigma_pi: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_pi, dtype=float))
        sig = np.atleast_2d(np.asarray(self.Sigma_pi, dtype=float))
        if sig.shape != (mu.size, mu.size):
            raise ValueError("Sigma_pi shape does not match mu_pi")
        scale = max(float(np.max(np.abs(sig))), 1.0)
        if np.max(np.abs(sig - sig.T)) > 1e-12 * scale:
            raise ValueError("Sigma_pi must be symmetric")
        sig = (sig + sig.T) / 2.0
        if np.min(np.linalg.eigvalsh(sig)) < -1e-12:
            raise ValueError("Sigma_pi must be positive semidefinite")
        object.__setattr__(self, "mu_pi", mu)
        object.__setattr__(self, "Sigma_pi", sig)

    @classmethod
    def flat(cls, dim: int) -> "ConjugatePrior":
        return cls(np.zeros(dim), np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.mu_pi.size

    def is_flat(self) -> bool:
        return not np.any(self.Sigma_pi)

    def log_density_fn(self, sigma_u: float) -> Callable[[np.ndarray], np.ndarray]:
        """Batched log prior density; requires an invertible ``Sigma_pi``."""
        cov = sigma_u**2 * np.linalg.inv(self.Sigma_pi)
        dist = GaussianDist(self.mu_pi, (cov + cov.T) / 2.0)
        from .gaussians import log_density

        return lambda pts: log_density(dist, pts)


@dataclass(frozen=True)
class LikelihoodEvaluator:
    """Joint log-likelihood of the full sample as a function of the parameter.

    ``log_lik`` maps an (N, dim) array of parameter points to the (N,) array
    of log-likelihood values; it must be finite on any grid box it is asked
    to fill and re-entrant (no shared mutable state).
    """

    log_lik: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError("parameter dimension mismatch")
        return np.asarray(self.log_lik(pts), dtype=float)


def conjugate_alpha_posterior(
    W: np.ndarray,
    Y: np.ndarray,
    prior: ConjugatePrior,
    sigma_u: float,
    alpha: float,
) -> GaussianDist:
    """Closed-form tempered posterior for the Gaussian linear model.

    With ``S = W'W/n + Sigma_pi/(alpha n)`` the posterior is Gaussian with
    mean ``S^{-1} (Sigma_pi mu_pi / (alpha n) + W'Y/n)`` and covariance
    ``sigma_u^2 / (alpha n) * S^{-1}``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    Y = np.asarray(Y, dtype=float).ravel()
    n = W.shape[0]
    if n < 1 or Y.size != n:
        raise ValueError("design and response row counts disagree")
    s = W.T @ W / n + prior.Sigma_pi / (alpha * n)
    b = prior.Sigma_pi @ prior.mu_pi / (alpha * n) + W.T @ Y / n
    try:
        mean = np.linalg.solve(s, b)
        cov = sigma_u**2 / (alpha * n) * np.linalg.inv(s)
    except np.linalg.LinAlgError as err:
        raise ValueError("singular normal-equations matrix") from err
    return GaussianDist(mean, (cov + cov.T) / 2.0)


@dataclass(frozen=True)
class AlphaPosteriorConjugate:
    """Conjugate tempered posterior bundled with the tempering level and sample size."""

    mu_n_alpha: np.ndarray
    Sigma_n_alpha: np.ndarray
    alpha: float
    n: int

    @classmethod
    def fit(cls, W, Y, prior: ConjugatePrior, sigma_u: float, alpha: float) -> "AlphaPosteriorConjugate":
        dist = conjugate_alpha_posterior(W, Y, prior, sigma_u, alpha)
        return cls(dist.mean, dist.cov, alpha, np.asarray(Y).size)

    @property
    def dist(self) -> GaussianDist:
        return GaussianDist(self.mu_n_alpha, self.Sigma_n_alpha)


def default_grid_axes(
    theta_hat_ml: np.ndarray,
    V: np.ndarray,
    n: int,
    alpha: float,
    num: int = 2001,
    scale: float = 10.0,
) -> list[np.ndarray]:
    """Default grid box: ML estimate +- scale / sqrt(alpha n lambda_min(V)) per axis.

    The half-width tracks the tempering-dependent spread of the Gaussian
    limit, so the box covers its support for any ``alpha``.  Callers that
    run 32-node Gauss-Hermite quadrature against the grid should widen the
    box (``scale`` around 14) since the outermost nodes of a matched
    Gaussian reach past 10 standard deviations.
    """
    theta_hat_ml = np.atleast_1d(np.asarray(theta_hat_ml, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    lam_min = float(np.min(np.linalg.eigvalsh(V)))
    half_width = scale / np.sqrt(alpha * n * lam_min)
    return [np.linspace(t - half_width, t + half_width, num) for t in theta_hat_ml]


def grid_alpha_posterior(
    lik: LikelihoodEvaluator,
    log_prior: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    axes: Sequence[np.ndarray],
) -> GridDensity:
    """Tempered posterior tabulated on a grid, for dimension <= 2.

    Node weights are proportional to ``exp(alpha * log_lik + log_prior)``;
    normalization is stabilized by a log-sum-exp shift so that likelihood
    magnitudes growing with the sample size never overflow.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if lik.dim > 2:
        raise ValueError("grid posteriors support dimension <= 2")
    if len(axes) != lik.dim:
        raise ValueError("axes count must match the likelihood dimension")
    for ax in axes:
        if len(ax) < 101:
            raise ValueError("each grid axis needs at least 101 nodes")
        if not np.all(np.isfinite(ax)):
            raise ValueError("grid axes must be finite")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    ll = lik(pts)
    if not np.all(np.isfinite(ll)):
        raise ValueError("non-finite log-likelihood on a grid node")
    lw = (alpha * ll + np.asarray(log_prior(pts), dtype=float)).reshape(mesh[0].shape)
    return GridDensity.from_log_unnormalized(axes, lw)


def gaussian_bvm_limit(theta_hat_ml: np.ndarray, V: np.ndarray, n: int, alpha: float) -> GaussianDist:
    """Large-sample Gaussian limit ``N(theta_hat_ml, V^{-1} / (alpha n))``.

    Tempering only rescales the covariance: ``alpha < 1`` inflates it, the
    location stays at the maximum likelihood estimator.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    V = np.atleast_2d(np.asarray(V, dtype=float))
    cov = np.linalg.inv(V) / (alpha * n)
    return GaussianDist(np.atleast_1d(np.asarray(theta_hat_ml, dtype=float)), (cov + cov.T) / 2.0)


def concentration_probability(
    post: GaussianDist | GridDensity,
    theta_star: np.ndarray,
    radius: float,
    n: int,
    rng: np.random.Generator | None = None,
    draws: int = 100_000,
) -> float:
    """Posterior probability that ``sqrt(n) * (theta - theta_star)`` leaves a ball.

    Returns ``P(||sqrt(n)(theta - theta_star)|| > radius)`` under ``post``.
    Gaussian posteriors use the exact normal tail in one dimension and Monte
    Carlo (``draws`` samples from an explicit ``rng``) otherwise; grid
    posteriors use a masked trapezoid sum.
    """
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    if isinstance(post, GaussianDist):
        if post.dim != theta_star.size:
            raise ValueError("dimension mismatch")
        shift = np.sqrt(n) * (post.mean - theta_star)
        if post.dim == 1:
            sd = float(np.sqrt(n * post.cov[0, 0]))
            m = float(shift[0])
            return float(norm.cdf((-radius - m) / sd) + norm.sf((radius - m) / sd))
        if rng is None:
            rng = np.random.default_rng(0)
        z = rng.standard_normal((draws, post.dim)) @ (np.sqrt(n) * post.chol).T + shift
        return float(np.mean(np.linalg.norm(z, axis=1) > radius))
    if post.dim != theta_star.size:
        raise ValueError("dimension mismatch")
    pts = post.nodes()
    mask = np.linalg.norm(np.sqrt(n) * (pts - theta_star), axis=1) > radius
    w = trapezoid_weights(post.axes).ravel() * post.pdf().ravel()
    return float(np.sum(w[mask]))
