"""Expected-KL robustness of tempered posteriors and the optimal tempering level.

A decision maker attaches probability ``eps_n`` to the likelihood being
misspecified and measures a reporting rule by the expected KL divergence
from the posterior they should have reported:

    ``r(alpha) = eps_n * KL(true posterior || reported)
               + (1 - eps_n) * KL(regular posterior || reported)``

Replacing every posterior by its Gaussian large-sample limit produces the
surrogate criteria ``r_star`` (tempered posterior reported) and
``r_tilde_star`` (its mean-field approximation reported).  Both reduce to
``(alpha * A_n - p log(alpha) + B_n) / 2``, strictly convex in ``alpha``
with unique minimizer ``p / A_n`` -- strictly below one as soon as the true
and pseudo-true parameters differ.  The limiting criterion ``r_infinity``
and the optimized limits complete the picture: the regular posterior's
expected KL grows linearly in the squared misspecification while the
optimally tempered one grows only logarithmically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .gaussians import GaussianDist, kl_gaussian

__all__ = [
    "MisspecScenario",
    "FiniteSampleInputs",
    "RobustnessCurve",
    "a_n",
    "b_n",
    "r_star",
    "r_tilde_star",
    "r_star_closed_form",
    "r_tilde_star_closed_form",
    "optimal_alpha",
    "optimal_alpha_tilde",
    "limit_alpha_star",
    "limit_alpha_tilde",
    "r_infinity",
    "optimized_limit_kl",
    "optimized_limit_kl_var",
    "exact_expected_kl",
    "golden_section_minimize",
]


def _spd(mat, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"{name} must be symmetric positive definite") from err
    return mat


@dataclass(frozen=True)
class MisspecScenario:
    """Population-level ingredients of the robustness analysis.

    ``theta0`` is the true parameter, ``theta_star`` the pseudo-true one, ``V``
    the likelihood curvature at ``theta_star``, ``Omega`` the asymptotic
    covariance scale of the correctly specified posterior (an input here;
    the regression example computes it), and ``eps`` the limit of
    ``n * eps_n``.
    """

    theta0: np.ndarray
    theta_star: np.ndarray
    V: np.ndarray
    Omega: np.ndarray
    eps: float

    def __post_init__(self):
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        theta_star = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        V = _spd(self.V, "V")
        Omega = _spd(self.Omega, "Omega")
        p = theta0.size
        if theta_star.size != p or V.shape != (p, p) or Omega.shape != (p, p):
            raise ValueError("scenario dimensions disagree")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "theta_star", theta_star)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "Omega", Omega)

    @property
    def p(self) -> int:
        return self.theta0.size

    @property
    def d(self) -> np.ndarray:
        """Misspecification direction ``theta0 - theta_star``."""
        return self.theta0 - self.theta_star

    @property
    def V_tilde(self) -> np.ndarray:
        """diag(V): the curvature seen by the mean-field approximation."""
        return np.diag(np.diag(self.V))


@dataclass(frozen=True)
class FiniteSampleInputs:
    """Sample-size-n ingredients: the two ML estimates, n, and the misspecification probability."""

    theta_hat_ml_F: np.ndarray
    theta_hat_ml_G: np.ndarray
    n: int
    eps_n: float

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.theta_hat_ml_F, dtype=float))
        g = np.atleast_1d(np.asarray(self.theta_hat_ml_G, dtype=float))
        if f.size != g.size:
            raise ValueError("ML estimates must share a dimension")
        if not 0.0 <= self.eps_n <= 1.0:
            raise ValueError("eps_n must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        object.__setattr__(self, "theta_hat_ml_F", f)
        object.__setattr__(self, "theta_hat_ml_G", g)

    @classmethod
    def at_population_limits(cls, s: MisspecScenario, n: int, eps_n: float | None = None) -> "FiniteSampleInputs":
        """Inputs with both estimators at their probability limits and ``eps_n = eps / n``."""
        if eps_n is None:
            eps_n = s.eps / n
        return cls(s.theta_star, s.theta0, n, eps_n)


def a_n(Sigma: np.ndarray, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Linear coefficient of the surrogate criterion in ``alpha``.

    ``eps_n tr(Sigma Omega) + (1 - eps_n) tr(Sigma V^{-1})
    + n eps_n (theta_F - theta_G)' Sigma (theta_F - theta_G)``.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    delta = f.theta_hat_ml_F - f.theta_hat_ml_G
    v_inv = np.linalg.inv(s.V)
    return float(
        f.eps_n * np.trace(Sigma @ s.Omega)
        + (1.0 - f.eps_n) * np.trace(Sigma @ v_inv)
        + f.n * f.eps_n * delta @ Sigma @ delta
    )


def b_n(Sigma: np.ndarray, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Alpha-free term: ``-p + eps_n log(1/(|Omega||Sigma|)) + (1-eps_n) log(|V|/|Sigma|)``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    sign, logdet_sigma = np.linalg.slogdet(Sigma)
    if sign <= 0:
        raise ValueError("Sigma must have positive determinant")
    _, logdet_omega = np.linalg.slogdet(s.Omega)
    _, logdet_v = np.linalg.slogdet(s.V)
    return float(
        -s.p
        + f.eps_n * (-logdet_omega - logdet_sigma)
        + (1.0 - f.eps_n) * (logdet_v - logdet_sigma)
    )


def _surrogate_direct(alpha: float, s: MisspecScenario, f: FiniteSampleInputs, reported_curv: np.ndarray) -> float:
    # The two explicit Gaussian KL terms with reported covariance
    # reported_curv^{-1} / (alpha n).
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    reported = GaussianDist(f.theta_hat_ml_F, np.linalg.inv(reported_curv) / (alpha * f.n))
    true_limit = GaussianDist(f.theta_hat_ml_G, s.Omega / f.n)
    regular_limit = GaussianDist(f.theta_hat_ml_F, np.linalg.inv(s.V) / f.n)
    return f.eps_n * kl_gaussian(true_limit, reported) + (1.0 - f.eps_n) * kl_gaussian(
        regular_limit, reported
    )


def r_star(alpha: float, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Surrogate expected KL for the tempered posterior, via the explicit Gaussian KLs."""
    return _surrogate_direct(alpha, s, f, s.V)


def r_tilde_star(alpha: float, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Surrogate expected KL for the mean-field approximation (curvature diag(V))."""
    return _surrogate_direct(alpha, s, f, s.V_tilde)


def r_star_closed_form(alpha: float, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """``(alpha A_n(V) - p log(alpha) + B_n(V)) / 2``; must agree with :func:`r_star`."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return 0.5 * (alpha * a_n(s.V, s, f) - s.p * np.log(alpha) + b_n(s.V, s, f))


def r_tilde_star_closed_form(alpha: float, s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """``(alpha A_n(diag V) - p log(alpha) + B_n(diag V)) / 2``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    vt = s.V_tilde
    return 0.5 * (alpha * a_n(vt, s, f) - s.p * np.log(alpha) + b_n(vt, s, f))


def optimal_alpha(s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Unique minimizer ``p / A_n(V)`` of the surrogate criterion.

    ``alpha -> alpha A - p log(alpha)`` is strictly convex for ``A > 0``, so
    the first-order condition pins the global minimum.
    """
    a = a_n(s.V, s, f)
    assert a > 0, "A_n must be positive for SPD inputs"
    return s.p / a


def optimal_alpha_tilde(s: MisspecScenario, f: FiniteSampleInputs) -> float:
    """Unique minimizer ``p / A_n(diag V)`` of the mean-field surrogate criterion."""
    a = a_n(s.V_tilde, s, f)
    assert a > 0, "A_n must be positive for SPD inputs"
    return s.p / a


def limit_alpha_star(s: MisspecScenario) -> float:
    """Large-sample optimal tempering ``p / (p + eps d'Vd)``, strictly < 1 when d != 0."""
    d = s.d
    return s.p / (s.p + s.eps * float(d @ s.V @ d))


def limit_alpha_tilde(s: MisspecScenario) -> float:
    """Mean-field analogue ``p / (tr(diag(V) V^{-1}) + eps d' diag(V) d)``.

    Strictly below one whenever ``d != 0`` or ``V`` has off-diagonal mass
    (``tr(diag(V) V^{-1}) >= p`` with equality only for diagonal ``V``).
    """
    d = s.d
    vt = s.V_tilde
    trace = float(np.trace(vt @ np.linalg.inv(s.V)))
    return s.p / (trace + s.eps * float(d @ vt @ d))


def r_infinity(alpha: float, p: int, eps: float, d_quad: float) -> float:
    """Limit of the expected-KL criterion: ``(alpha p + alpha eps d_quad - p log(alpha) - p) / 2``.

    ``d_quad`` is the squared misspecification ``(theta0-theta_star)' V (theta0-theta_star)``.
    At ``alpha = 1`` this is ``eps * d_quad / 2``: the regular posterior's
    expected KL grows linearly in the squared misspecification.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if d_quad < 0:
        raise ValueError("d_quad must be nonnegative")
    return 0.5 * (alpha * p + alpha * eps * d_quad - p * np.log(alpha) - p)


def optimized_limit_kl(s: MisspecScenario) -> float:
    """Expected KL at the optimal tempering: ``(-p log p + p log(p + eps d'Vd)) / 2``.

    Grows logarithmically in the squared misspecification, against the
    linear growth of the untempered criterion.
    """
    d = s.d
    return 0.5 * (-s.p * np.log(s.p) + s.p * np.log(s.p + s.eps * float(d @ s.V @ d)))


def optimized_limit_kl_var(s: MisspecScenario) -> float:
    """Mean-field analogue of :func:`optimized_limit_kl`, with the determinant correction."""
    d = s.d
    vt = s.V_tilde
    trace = float(np.trace(vt @ np.linalg.inv(s.V)))
    _, logdet_v = np.linalg.slogdet(s.V)
    logdet_vt = float(np.sum(np.log(np.diag(s.V))))
    return 0.5 * (
        -s.p * np.log(s.p)
        + s.p * np.log(trace + s.eps * float(d @ vt @ d))
        + (logdet_v - logdet_vt)
    )


def exact_expected_kl(
    true_post: GaussianDist,
    alpha_post: GaussianDist,
    std_post: GaussianDist,
    eps_n: float,
    sandwich_cov: np.ndarray | None = None,
) -> float:
    """Finite-sample expected KL with explicit posterior inputs.

    ``eps_n * KL(true_post || alpha_post) + (1 - eps_n) * KL(std_post || alpha_post)``.
    The same call evaluates the variational criterion when ``alpha_post`` is
    the diagonal approximation.  ``sandwich_cov`` optionally swaps the
    covariance of the misspecification target for a sandwich matrix
    (off by default; the criterion value only depends on the target through
    its mean gap and the reported covariance, so minimizers are unchanged).
    """
    if not 0.0 <= eps_n <= 1.0:
        raise ValueError("eps_n must lie in [0, 1]")
    if sandwich_cov is not None:
        true_post = GaussianDist(true_post.mean, sandwich_cov)
    return eps_n * kl_gaussian(true_post, alpha_post) + (1.0 - eps_n) * kl_gaussian(
        std_post, alpha_post
    )


@dataclass(frozen=True)
class RobustnessCurve:
    """Tabulated robustness criteria over a grid of tempering levels."""

    alphas: np.ndarray
    r_star_vals: np.ndarray
    r_tilde_star_vals: np.ndarray
    r_exact_vals: np.ndarray | None = None

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        rs = np.asarray(self.r_star_vals, dtype=float)
        rt = np.asarray(self.r_tilde_star_vals, dtype=float)
        if np.any(np.diff(alphas) <= 0) or np.any(alphas <= 0):
            raise ValueError("alphas must be sorted positive values")
        if rs.shape != alphas.shape or rt.shape != alphas.shape:
            raise ValueError("curve arrays must share the alpha grid length")
        arrays = [alphas, rs, rt]
        if self.r_exact_vals is not None:
            re = np.asarray(self.r_exact_vals, dtype=float)
            if re.shape != alphas.shape:
                raise ValueError("curve arrays must share the alpha grid length")
            arrays.append(re)
            object.__setattr__(self, "r_exact_vals", re)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "r_star_vals", rs)
        object.__setattr__(self, "r_tilde_star_vals", rt)

    @classmethod
    def evaluate(
        cls,
        alphas: Sequence[float],
        s: MisspecScenario,
        f: FiniteSampleInputs,
        exact_fn: Callable[[float], float] | None = None,
    ) -> "RobustnessCurve":
        alphas = np.asarray(sorted(alphas), dtype=float)
        rs = np.array([r_star(a, s, f) for a in alphas])
        rt = np.array([r_tilde_star(a, s, f) for a in alphas])
        re = np.array([exact_fn(a) for a in alphas]) if exact_fn is not None else None
        return cls(alphas, rs, rt, re)

    def argmin_alpha(self) -> float:
        """Grid argmin of the tempered-posterior surrogate column."""
        return float(self.alphas[int(np.argmin(self.r_star_vals))])


def golden_section_minimize(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
) -> float:
    """Derivative-free golden-section minimizer of a unimodal scalar function.

    Deterministic: shrinks the bracket until its width falls below ``tol``
    and returns the midpoint.
    """
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0
