"""Transmission-matrix design for ML reception over a correlated channel.

Both designs take the form ``B = diag(gamma) V_K^H`` with ``V_K`` the
leading eigenvectors of the channel covariance. They differ in the power
split ``x_k = gamma_k^2`` (``sum x_k <= 1``):

* ``exact`` minimizes the worst-case pairwise error probability
  ``G(x) = (1/pi) int_0^{pi/2} prod_k (1 + eps lam_k x_k / sin^2 t)^-1 dt``
  with ``eps = d_min^2 / (8 sigma2)``. ``G`` is convex in ``x``, and the
  solver is projected gradient with Armijo backtracking.
* ``waterfill`` minimizes the Chernoff surrogate (``sin t = 1``) in closed form.

``sigma2`` is the noise variance per real dimension (see ``analytics``).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_hermitian, check_positive
from .exceptions import ConvergenceError
from .numerics import angular_rule, hermitian_eig, smallest_positive

METHODS = ("identity", "waterfill", "exact")
ACTIVE_TOL = 1e-8
PG_TOL = 1e-9
MAX_ITER = 10_000
ARMIJO = 1e-4
EIG_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class BeamformerDesign:
    K: int
    gammas: np.ndarray
    B: np.ndarray
    objective_value: float
    method: str
    iterations: int = 0

    @property
    def gamma_sq(self):
        return self.gammas**2

    @property
    def power(self):
        return float(np.sum(self.gammas**2))


# -- objective --------------------------------------------------------------


def _check_inputs(lambdas, gamma_sq, eps):
    lam = np.asarray(lambdas, dtype=float)
    x = np.asarray(gamma_sq, dtype=float)
    if lam.shape != x.shape:
        raise ValueError(f"lambdas {lam.shape} and gamma_sq {x.shape} differ in shape")
    if np.any(x < 0):
        raise ValueError("gamma_sq must be non-negative")
    return lam, x, check_positive(eps, "eps")


def _g_terms(coef, x, theta, w):
    """Objective and gradient of ``G`` on a fixed angular rule."""
    s2 = np.sin(theta) ** 2
    ratio = coef[:, None] / s2[None, :]  # (K, nodes)
    factors = 1.0 + ratio * x[:, None]
    prod = np.prod(1.0 / factors, axis=0)
    value = w @ prod / np.pi
    grad = -(ratio / factors * prod[None, :]) @ w / np.pi
    return float(value), grad


def g_objective(lambdas, gamma_sq, eps):
    """``G`` for eigenvalues ``lambdas``, power split ``gamma_sq`` and ``eps``."""
    lam, x, eps = _check_inputs(lambdas, gamma_sq, eps)
    coef = eps * lam
    width = smallest_positive(coef * x)
    theta, w = angular_rule(np.pi / 2, None if width is None else np.sqrt(width))
    return _g_terms(coef, x, theta, w)[0]


def g_gradient(lambdas, gamma_sq, eps):
    lam, x, eps = _check_inputs(lambdas, gamma_sq, eps)
    coef = eps * lam
    width = smallest_positive(coef * x)
    theta, w = angular_rule(np.pi / 2, None if width is None else np.sqrt(width))
    return _g_terms(coef, x, theta, w)[1]


def relax_objective(lambdas, gamma_sq, eps):
    """Chernoff surrogate ``0.5 * prod_k (1 + eps lam_k x_k)^-1``."""
    lam, x, eps = _check_inputs(lambdas, gamma_sq, eps)
    return float(0.5 / np.prod(1.0 + eps * lam * x))


def project_capped_simplex(v):
    """Euclidean projection onto ``{x >= 0, sum(x) <= 1}``."""
    y = np.maximum(v, 0.0)
    if y.sum() <= 1.0:
        return y
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - css / k > 0)
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def kkt_residual(lambdas, gamma_sq, eps, active_tol=ACTIVE_TOL):
    """Stationarity gaps at a candidate optimum.

    Returns ``(spread, violation)``: the spread of partial derivatives over
    the active coordinates, and how far any inactive partial falls below the
    common active value (zero when the KKT conditions hold).
    """
    grad = g_gradient(lambdas, gamma_sq, eps)
    x = np.asarray(gamma_sq, dtype=float)
    active = x >= active_tol
    common = grad[active].mean()
    spread = float(np.ptp(grad[active]))
    inactive = grad[~active]
    violation = float(max(0.0, (common - inactive).max(initial=0.0)))
    return spread, violation


# -- solvers ----------------------------------------------------------------


def _modes(Sigma):
    eig = hermitian_eig(as_hermitian(Sigma, "Sigma", tol=1e-10))
    lam = np.asarray(eig.lambdas, dtype=float)
    if lam.size == 0 or lam[0] <= 0:
        raise ValueError("covariance must be nonzero PSD")
    keep = lam > EIG_FLOOR * lam[0]
    return lam[keep], np.asarray(eig.vectors)[:, keep]


def _assemble(method, x, lam, V, objective, iterations=0):
    K = int(np.count_nonzero(x >= ACTIVE_TOL))
    gammas = np.sqrt(x[:K])
    B = gammas[:, None] * V[:, :K].conj().T
    return BeamformerDesign(K, gammas, B, float(objective), method, iterations)


def minimize_g(lambdas, eps, max_iter=MAX_ITER, tol=PG_TOL):
    """Projected-gradient minimization of ``G`` over the capped simplex.

    Steps start from a Barzilai-Borwein estimate and are halved until the
    Armijo condition holds. Stops when ``||x - P(x - grad)|| < tol``.
    Returns ``(x, value, iterations)``.
    """
    lam = np.asarray(lambdas, dtype=float)
    coef = eps * lam
    # fixed rule resolving every power level down to the activity threshold
    theta, w = angular_rule(np.pi / 2, np.sqrt(coef.min() * ACTIVE_TOL))
    x = np.full(lam.size, 1.0 / lam.size)
    f, g = _g_terms(coef, x, theta, w)
    step = 1.0 / max(np.abs(g).max(), 1e-300)
    for it in range(1, max_iter + 1):
        if np.linalg.norm(x - project_capped_simplex(x - g)) < tol:
            return x, f, it
        while True:
            x_new = project_capped_simplex(x - step * g)
            f_new, g_new = _g_terms(coef, x_new, theta, w)
            if f_new <= f + ARMIJO * g @ (x_new - x) or step < 1e-300:
                break
            step *= 0.5
        s, r = x_new - x, g_new - g
        x, f, g = x_new, f_new, g_new
        sr = s @ r
        step = (s @ s) / sr if sr > 0 else step * 2.0
    raise ConvergenceError(f"projected gradient did not converge in {max_iter} iterations", best=x)


def optimize_exact(Sigma, d_min, sigma2):
    """Power split minimizing the exact worst-case pairwise error probability."""
    d_min = check_positive(d_min, "d_min")
    sigma2 = check_positive(sigma2, "sigma2")
    lam, V = _modes(Sigma)
    eps = d_min**2 / (8.0 * sigma2)
    try:
        x, _, iters = minimize_g(lam, eps)
    except ConvergenceError as err:
        x = err.best
        raise ConvergenceError(str(err), best=_assemble("exact", np.where(x >= ACTIVE_TOL, x, 0.0), lam, V, np.nan)) from None
    x = np.where(x >= ACTIVE_TOL, x, 0.0)
    K = int(np.count_nonzero(x))
    return _assemble("exact", x, lam, V, g_objective(lam[:K], x[:K], eps), iters)


def waterfill_levels(lambdas, noise_ratio):
    """Closed-form split maximizing ``prod_k (1 + lam_k x_k / noise_ratio)``.

    ``lambdas`` are positive and sorted descending. Uses the largest ``M0``
    keeping every active level strictly positive; the result sums to one.
    """
    lam = np.asarray(lambdas, dtype=float)
    inv = noise_ratio / lam
    for m0 in range(lam.size, 0, -1):
        # level - inv_k written as a sum of differences: exact for equal modes
        active = (1.0 + (inv[:m0][None, :] - inv[:m0][:, None]).sum(axis=1)) / m0
        if np.all(active > 0):
            x = np.zeros(lam.size)
            x[:m0] = active
            return x, m0
    raise AssertionError("unreachable: one mode always has positive level")


def optimize_waterfill(Sigma, d_min, sigma2):
    """Water-filling split minimizing the worst-case Chernoff bound."""
    d_min = check_positive(d_min, "d_min")
    sigma2 = check_positive(sigma2, "sigma2")
    lam, V = _modes(Sigma)
    eps = d_min**2 / (8.0 * sigma2)
    x, m0 = waterfill_levels(lam, 1.0 / eps)
    return _assemble("waterfill", x, lam, V, relax_objective(lam[:m0], x[:m0], eps))


def identity_beamformer(M, K=None):
    """``(1 / sqrt(K)) [I_K | 0]``, unit transmit power."""
    M = int(M)
    K = M if K is None else int(K)
    if not 1 <= K <= M:
        raise ValueError(f"need 1 <= K <= M, got K={K}, M={M}")
    gammas = np.full(K, 1.0 / np.sqrt(K))
    return BeamformerDesign(K, gammas, np.eye(K, M) / np.sqrt(K), float("nan"), "identity")


def design_beamformer(method, Sigma, d_min=None, sigma2=None, K=None):
    if method == "identity":
        return identity_beamformer(np.asarray(Sigma).shape[0], K)
    if method == "waterfill":
        return optimize_waterfill(Sigma, d_min, sigma2)
    if method == "exact":
        return optimize_exact(Sigma, d_min, sigma2)
    raise ValueError(f"unknown beamformer {method!r}; expected one of {METHODS}")


class BeamformerDesigner(TransformerMixin, BaseEstimator):
    """Fit a transmission matrix to a channel covariance.

    ``fit(Sigma)`` sets ``B_``, ``K_``, ``gammas_`` and ``design_``;
    ``transform(h)`` maps channel vectors (rows) to effective taps ``B h``.
    """

    def __init__(self, method="exact", d_min=2.0, noise_var=1.0, K=None):
        self.method = method
        self.d_min = d_min
        self.noise_var = noise_var
        self.K = K

    def fit(self, Sigma, y=None):
        self.design_ = design_beamformer(self.method, Sigma, self.d_min, self.noise_var, self.K)
        self.B_ = self.design_.B
        self.K_ = self.design_.K
        self.gammas_ = self.design_.gammas
        return self

    def transform(self, h):
        check_is_fitted(self, "B_")
        return np.atleast_2d(np.asarray(h, dtype=complex)) @ self.B_.T
