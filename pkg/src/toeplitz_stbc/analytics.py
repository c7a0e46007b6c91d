"""Closed-form error analysis for the Toeplitz-coded MISO link.

Noise convention: ``sigma2`` in the pairwise-error functions and the SNR
``rho = E_s / sigma2`` in the symbol-error functions refer to the noise
variance *per real dimension*. For circular noise CN(0, N0) that is
``sigma2 = N0 / 2`` and ``rho = 2 E_s / N0``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import as_hermitian, check_positive
from .modulation import _validate_mu
from .numerics import angular_rule, psd_sqrt, q_function, q_squared, smallest_positive
from .stbc import encode, toeplitz_matrix

SCHEME_INDEX = {"qam": 1, "pam": 2, "psk": 3}


@dataclass(frozen=True)
class SchemeConstants:
    scheme_index: int
    a: float
    prefactor: float


def scheme_constants(scheme, mu):
    """Exponent constant ``a_i`` and multiplicity ``(mu - 1)/mu`` of the unified bound."""
    scheme = str(scheme).lower()
    mu = _validate_mu(scheme, mu)
    if scheme == "qam":
        a = 3.0 / (4.0 * (mu - 1))
    elif scheme == "pam":
        a = 3.0 / (2.0 * (mu * mu - 1))
    else:
        a = np.sin(np.pi / mu) ** 2 / 2.0
    return SchemeConstants(SCHEME_INDEX[scheme], float(a), (mu - 1) / mu)


def _args(rho, gram_inv_diag):
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(gram_inv_diag, dtype=float)
    if np.any(g <= 0) or np.any(~np.isfinite(g)):
        raise ValueError("gram_inv_diag must be positive and finite")
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    return rho, g


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _exp_angular(c, upper):
    """``(1/pi) * int_0^upper exp(-c / sin^2 t) dt`` for an array of ``c >= 0``."""
    c = np.asarray(c, dtype=float)
    width = smallest_positive(c)
    theta, w = angular_rule(upper, None if width is None else np.sqrt(width))
    vals = np.exp(-np.multiply.outer(c, 1.0 / np.sin(theta) ** 2))
    return vals @ w / np.pi


def sep_zf(scheme, mu, rho, gram_inv_diag):
    """Exact symbol error probability of one ZF-equalized symbol.

    ``gram_inv_diag`` is ``[(Hc^H Hc)^-1]_ll`` for the symbol of interest,
    so ``gram_inv_diag / rho`` scales the post-equalizer noise.
    """
    scheme = str(scheme).lower()
    mu = _validate_mu(scheme, mu)
    rho, g = _args(rho, gram_inv_diag)
    if scheme == "qam":
        a = 1.0 - 1.0 / np.sqrt(mu)
        z = np.sqrt(3.0 * rho / (2.0 * (mu - 1) * g))
        out = 4 * a * q_function(z) - 4 * a * a * q_squared(z)
    elif scheme == "pam":
        z = np.sqrt(3.0 * rho / ((mu * mu - 1) * g))
        out = 2.0 * (mu - 1) / mu * q_function(z)
    else:
        c = rho * np.sin(np.pi / mu) ** 2 / (2.0 * g)
        out = _exp_angular(c, (mu - 1) * np.pi / mu)
    return _scalar(out)


def sep_zf_qam_angular(mu, rho, gram_inv_diag):
    """Square-QAM ZF symbol error probability from two finite-range angular integrals.

    Expanding ``4a Q - 4a^2 Q^2`` with ``a = 1 - 1/sqrt(mu)`` weights the
    ``[0, pi/4]`` part by ``1/sqrt(mu)`` and the ``[pi/4, pi/2]`` part by one.
    """
    mu = _validate_mu("qam", mu)
    rho, g = _args(rho, gram_inv_diag)
    a = 1.0 - 1.0 / np.sqrt(mu)
    c = 3.0 * rho / (4.0 * (mu - 1) * g)
    low = _exp_angular(c, np.pi / 4)
    full = _exp_angular(c, np.pi / 2)
    return _scalar(4.0 * a * (low / np.sqrt(mu) + (full - low)))


def sep_upper_bound(scheme, mu, rho, gram_inv_diag):
    """Unified bound ``(mu - 1)/mu * exp(-a_i rho / gram_inv_diag)``."""
    k = scheme_constants(scheme, mu)
    rho, g = _args(rho, gram_inv_diag)
    return _scalar(k.prefactor * np.exp(-k.a * rho / g))


def avg_sep_bound(scheme, mu, rho, C0, Sigma):
    """Channel-averaged bound ``(mu - 1)/mu * det(I + a_i rho C0 Sigma)^-1``."""
    k = scheme_constants(scheme, mu)
    C0 = check_positive(C0, "C0")
    Sigma = as_hermitian(Sigma, "Sigma")
    rho = np.asarray(rho, dtype=float)
    lam = np.clip(np.linalg.eigvalsh(0.5 * (Sigma + Sigma.conj().T)), 0.0, None)
    factor = np.prod(1.0 + np.multiply.outer(k.a * rho * C0, lam), axis=-1)
    return _scalar(k.prefactor / factor)


def _pep_matrix(code, Sigma, e, sigma2):
    e = np.asarray(e, dtype=complex)
    if not np.any(e):
        raise ValueError("error vector must be nonzero")
    sigma2 = check_positive(sigma2, "sigma2")
    Sigma = as_hermitian(Sigma, "Sigma", tol=1e-10)
    X = encode(code, e)
    return Sigma @ (X.conj().T @ X) / (8.0 * sigma2), Sigma


def pep_exact(code, Sigma, e, sigma2):
    """Channel-averaged pairwise error probability for error vector ``e``.

    Evaluates ``(1/pi) int_0^{pi/2} det(I + A / sin^2 t)^-1 dt`` with
    ``A = Sigma X^H X / (8 sigma2)`` and ``X`` the codeword of ``e``. ``A`` is
    similar to the Hermitian ``S X^H X S / (8 sigma2)`` (``S = Sigma^1/2``),
    so the determinant is the product over its eigenvalues.
    """
    _, Sigma = _pep_matrix(code, Sigma, e, sigma2)
    root = psd_sqrt(Sigma)
    X = encode(code, e)
    nu = np.clip(np.linalg.eigvalsh(root @ (X.conj().T @ X) @ root) / (8.0 * sigma2), 0.0, None)
    width = smallest_positive(nu)
    theta, w = angular_rule(np.pi / 2, None if width is None else np.sqrt(width))
    s2 = np.sin(theta) ** 2
    vals = np.prod(s2[:, None] / (s2[:, None] + nu[None, :]), axis=1)
    return float(w @ vals / np.pi)


def pep_chernoff(code, Sigma, e, sigma2):
    """Chernoff bound ``1 / (2 det(I + Sigma X^H X / (8 sigma2)))``."""
    A, _ = _pep_matrix(code, Sigma, e, sigma2)
    return float(0.5 / np.linalg.det(np.eye(A.shape[0]) + A).real)


# -- existence constants ----------------------------------------------------


@dataclass(frozen=True)
class ConstantEstimate:
    """Sampled bounds on Gram determinants over the unit sphere.

    ``c_min_hat`` over-estimates the true minimum and ``c_max_hat``
    under-estimates the true maximum. ``c0_hat`` is ``c_min_hat`` over the
    largest leave-one-column-out determinant.
    """

    c_min_hat: float
    c_max_hat: float
    c0_hat: float
    samples: int


class ToeplitzFamily:
    """Matrix family ``alpha -> T(alpha, L, K)`` on unit vectors of length ``L``."""

    def __init__(self, L, K):
        self.L = int(L)
        self.K = int(K)
        self.dim = self.L

    def __call__(self, alpha):
        return toeplitz_matrix(alpha, self.L, self.K)

    def __repr__(self):
        return f"ToeplitzFamily(L={self.L}, K={self.K})"


def unit_sphere(rng, n, dim):
    """``n`` points uniform on the complex unit sphere in ``C^dim``."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def gram_determinants(H):
    """``det(H^H H)`` and every leave-one-column-out Gram determinant."""
    gram = np.swapaxes(H.conj(), -1, -2) @ H
    full = np.linalg.det(gram).real
    L = gram.shape[-1]
    if L == 1:
        return full, np.ones(full.shape + (1,))
    minors = np.empty(full.shape + (L,))
    for ell in range(L):
        keep = [j for j in range(L) if j != ell]
        minors[..., ell] = np.linalg.det(gram[..., keep, :][..., :, keep]).real
    return full, minors


def estimate_constants(generator, samples, rng=None, chunk=20000, return_samples=False):
    """Running min/max of ``det(H^H H)`` over uniformly drawn unit vectors.

    ``generator`` maps a batch of unit vectors (shape ``(n, generator.dim)``)
    to matrices ``(n, rows, cols)``.
    """
    samples = int(samples)
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = np.random.default_rng(rng)
    lo, hi = np.inf, -np.inf
    minor_hi = None
    kept_h, kept_d = [], []
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        h = unit_sphere(rng, n, generator.dim)
        det, minors = gram_determinants(generator(h))
        lo = min(lo, det.min())
        hi = max(hi, det.max())
        m = minors.max(axis=0)
        minor_hi = m if minor_hi is None else np.maximum(minor_hi, m)
        if return_samples:
            kept_h.append(h)
            kept_d.append(det)
        done += n
    est = ConstantEstimate(float(lo), float(hi), float(lo / minor_hi.max()), samples)
    if return_samples:
        return est, np.concatenate(kept_h), np.concatenate(kept_d)
    return est


# -- diversity --------------------------------------------------------------


def diversity_prediction(scheme, M, L, g):
    """Predicted ZF diversity ``D(g)`` and the optimal tradeoff ``M (1 - g)``.

    Square QAM gives ``M (1 - N g / L)``; PAM and PSK give
    ``M (1 - 2 N g / L)``, with ``N = L + M - 1``.
    """
    scheme = str(scheme).lower()
    if scheme not in SCHEME_INDEX:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not 0 <= g <= 1:
        raise ValueError("multiplexing gain must lie in [0, 1]")
    N = L + M - 1
    factor = 1.0 if scheme == "qam" else 2.0
    return M * (1.0 - factor * N * g / L), M * (1.0 - g)


def diversity_slope_estimate(points):
    """Diversity order ``-10 * d log10(rate) / d snr_db`` by least squares.

    Points with zero or non-finite rates are dropped; at least three usable
    points are required.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    ok = np.isfinite(pts[:, 1]) & (pts[:, 1] > 0)
    pts = pts[ok]
    if len(pts) < 3:
        raise ValueError("need at least three points with positive error rate")
    slope = np.polyfit(pts[:, 0], np.log10(pts[:, 1]), 1)[0]
    return float(-10.0 * slope)
