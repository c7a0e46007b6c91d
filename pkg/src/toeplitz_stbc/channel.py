"""Correlated Rayleigh MISO channels, additive noise and SNR bookkeeping."""

from dataclasses import dataclass

import numpy as np

from ._validation import as_hermitian, check_nonnegative, check_positive
from .modulation import make_constellation
from .numerics import gauss_legendre, hermitian_eig, psd_sqrt

CORRELATION_POINTS = 256
PSD_TOL = 1e-10


def correlation_broadside(M, spacing_ratio, angle_spread):
    """Transmit correlation of a broadside linear array with small angle spread.

    Entry ``(m1, m2)`` is the angular average of
    ``exp(-j 2 pi (m1 - m2) angle_spread spacing_ratio sin(t))`` over a full
    turn, evaluated with a 256-node Gauss-Legendre rule. ``angle_spread`` is in
    radians, ``spacing_ratio`` is antenna spacing over wavelength.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be a positive integer")
    spacing_ratio = check_positive(spacing_ratio, "spacing_ratio")
    if not 0 <= angle_spread < np.pi:
        raise ValueError(f"angle spread must lie in [0, pi), got {angle_spread}")
    theta, w = gauss_legendre(0.0, 2 * np.pi, CORRELATION_POINTS)
    lags = np.arange(M)
    phase = np.multiply.outer(2 * np.pi * lags * angle_spread * spacing_ratio, np.sin(theta))
    # the average of exp(-j x sin t) over a full turn is real
    row = np.real(np.exp(-1j * phase) @ w) / (2 * np.pi)
    diff = np.abs(lags[:, None] - lags[None, :])
    return row[diff].astype(complex)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Zero-mean circular Gaussian channel with covariance ``sigma_cov``."""

    sigma_cov: np.ndarray

    def __post_init__(self):
        cov = as_hermitian(self.sigma_cov, "sigma_cov")
        cov = 0.5 * (cov + cov.conj().T)
        eig = hermitian_eig(cov)
        scale = max(1.0, float(np.abs(eig.lambdas).max(initial=0.0)))
        if eig.lambdas.size and eig.lambdas.min() < -PSD_TOL * scale:
            raise ValueError("covariance is not positive semi-definite")
        coloring = psd_sqrt(cov, eig)
        for arr in (cov, coloring):
            arr.setflags(write=False)
        object.__setattr__(self, "sigma_cov", cov)
        object.__setattr__(self, "eig", eig)
        object.__setattr__(self, "coloring", coloring)

    @classmethod
    def iid(cls, M):
        return cls(np.eye(M, dtype=complex))

    @classmethod
    def broadside(cls, M, spacing_ratio, angle_spread_deg):
        return cls(correlation_broadside(M, spacing_ratio, np.deg2rad(angle_spread_deg)))

    @property
    def M(self):
        return self.sigma_cov.shape[0]

    def sample(self, rng, size=None):
        """``h = S w`` with ``w`` i.i.d. CN(0, 1); ``size`` adds leading axes."""
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.M,)
        w = complex_normal(rng, shape)
        return w @ self.coloring.T


def complex_normal(rng, shape, variance=1.0):
    """Circular complex Gaussian samples with total variance ``variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channel(model, rng):
    return model.sample(rng)


def transmit(X, h, sigma2, rng):
    """Received block ``X @ h + xi`` with ``xi`` i.i.d. CN(0, sigma2)."""
    sigma2 = check_nonnegative(sigma2, "sigma2")
    X = np.asarray(X, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if X.shape[-1] != h.shape[-1]:
        raise ValueError(f"X has {X.shape[-1]} columns but h has length {h.shape[-1]}")
    clean = np.einsum("...nm,...m->...n", X, h)
    if sigma2 == 0:
        return clean
    return clean + complex_normal(rng, clean.shape, sigma2)


@dataclass(frozen=True)
class SnrPoint:
    scheme_index: int
    symbol_snr: float
    block_snr: float
    noise_var: float


SCHEME_INDEX = {"qam": 1, "pam": 2, "psk": 3}


def block_snr(scheme, mu, M, L, N, sigma2):
    """Per-symbol and per-block SNR for a Toeplitz block of ``L`` symbols.

    Block energy is ``E_s * M * L`` against block noise power ``sigma2 * N``.
    """
    c = make_constellation(scheme, mu)
    sigma2 = check_positive(sigma2, "sigma2")
    return SnrPoint(
        scheme_index=SCHEME_INDEX[c.scheme],
        symbol_snr=c.avg_energy / sigma2,
        block_snr=c.avg_energy * M * L / (N * sigma2),
        noise_var=sigma2,
    )


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)
