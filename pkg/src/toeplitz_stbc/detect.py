"""Receivers for the block model ``y = Hc s + noise``.

The ``*_indices`` functions work on batches: ``Hc`` has shape ``(..., N, L)``
and ``y`` shape ``(..., N)``; they return constellation indices of shape
``(..., L)``. The ``*_detect`` functions take a single
:class:`DetectionProblem` and return ``(symbols, bits)``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_complex_matrix, as_complex_vector, check_nonnegative
from .exceptions import CapacityError, SingularChannelError
from .modulation import Constellation, indices_to_bits, make_constellation, nearest_indices

RANK_TOL = 1e-10
MAX_ML_CANDIDATES = 2**20
MAX_TRELLIS_STATES = 2**16
DETECTORS = ("zf", "mmse", "zfdfe", "ml", "viterbi")


@dataclass(frozen=True, eq=False)
class DetectionProblem:
    Hc: np.ndarray
    y: np.ndarray
    sigma2: float
    c: Constellation

    def __post_init__(self):
        Hc = as_complex_matrix(self.Hc, "Hc")
        if Hc.shape[0] < Hc.shape[1]:
            raise ValueError(f"need N >= L, got Hc of shape {Hc.shape}")
        object.__setattr__(self, "Hc", Hc)
        object.__setattr__(self, "y", as_complex_vector(self.y, "y", Hc.shape[0]))
        object.__setattr__(self, "sigma2", check_nonnegative(self.sigma2, "sigma2"))

    @property
    def full_rank(self):
        return np.linalg.svd(self.Hc, compute_uv=False).min() > RANK_TOL


# -- batched cores ---------------------------------------------------------


def singular_mask(R):
    """True where the triangular factor has a (numerically) zero pivot."""
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    scale = np.maximum(np.abs(R).max(axis=(-2, -1)), np.finfo(float).tiny)
    return diag.min(axis=-1) <= RANK_TOL * scale


def _qr(Hc):
    Q, R = np.linalg.qr(Hc)
    if np.any(singular_mask(R)):
        raise SingularChannelError("equivalent channel is rank deficient")
    return Q, R


def zf_equalize(Hc, y):
    """Least-squares estimate ``(Hc^H Hc)^-1 Hc^H y`` through a QR factorization."""
    Q, R = _qr(np.asarray(Hc, dtype=complex))
    z = np.einsum("...nl,...n->...l", Q.conj(), np.asarray(y, dtype=complex))
    return np.linalg.solve(R, z[..., None])[..., 0]


def gram_inverse_diagonal(Hc):
    """Diagonal of ``(Hc^H Hc)^-1`` from the rows of ``R^-1``."""
    _, R = _qr(np.asarray(Hc, dtype=complex))
    eye = np.broadcast_to(np.eye(R.shape[-1]), R.shape)
    Rinv = np.linalg.solve(R, eye)
    return np.sum(np.abs(Rinv) ** 2, axis=-1)


def mmse_equalize(Hc, y, sigma2, energy):
    """Regularized estimate ``(Hc^H Hc + sigma2/E_s I)^-1 Hc^H y``."""
    Hc = np.asarray(Hc, dtype=complex)
    HH = np.swapaxes(Hc.conj(), -1, -2)
    gram = HH @ Hc + (sigma2 / energy) * np.eye(Hc.shape[-1])
    rhs = HH @ np.asarray(y, dtype=complex)[..., None]
    return np.linalg.solve(gram, rhs)[..., 0]


def zf_indices(Hc, y, c):
    return nearest_indices(c, zf_equalize(Hc, y))


def mmse_indices(Hc, y, c, sigma2):
    return nearest_indices(c, mmse_equalize(Hc, y, sigma2, c.avg_energy))


def zfdfe_indices(Hc, y, c):
    """QR decision feedback: back-substitute from the last symbol, slicing as we go."""
    Q, R = _qr(np.asarray(Hc, dtype=complex))
    z = np.einsum("...nl,...n->...l", Q.conj(), np.asarray(y, dtype=complex))
    L = R.shape[-1]
    idx = np.zeros(z.shape, dtype=np.int64)
    decided = np.zeros(z.shape, dtype=complex)
    for ell in range(L - 1, -1, -1):
        resid = z[..., ell] - np.sum(R[..., ell, ell + 1 :] * decided[..., ell + 1 :], axis=-1)
        k = nearest_indices(c, resid / R[..., ell, ell])
        idx[..., ell] = k
        decided[..., ell] = c.points[k]
    return idx


def _candidates(mu, L):
    count = mu**L
    if count > MAX_ML_CANDIDATES:
        raise CapacityError(f"exhaustive ML over mu^L = {mu}^{L} exceeds {MAX_ML_CANDIDATES}")
    # rows in lexicographic order, first symbol most significant
    powers = mu ** np.arange(L - 1, -1, -1)
    return (np.arange(count)[:, None] // powers) % mu


def ml_exhaustive_indices(Hc, y, c, chunk_elems=2**22):
    """Brute-force ``argmin ||y - Hc s||^2`` over all of ``S^L``.

    Ties go to the lexicographically smallest index vector.
    """
    Hc = np.asarray(Hc, dtype=complex)
    y = np.asarray(y, dtype=complex)
    batch = Hc.shape[:-2]
    N, L = Hc.shape[-2:]
    cand = _candidates(c.mu, L)
    cpts = c.points[cand]  # (C, L)
    Hf = Hc.reshape((-1, N, L))
    yf = y.reshape((-1, N))
    out = np.empty((Hf.shape[0], L), dtype=np.int64)
    step = max(1, chunk_elems // (cand.shape[0] * N))
    for lo in range(0, Hf.shape[0], step):
        pred = np.einsum("tnl,cl->tcn", Hf[lo : lo + step], cpts)
        metric = np.sum(np.abs(yf[lo : lo + step, None, :] - pred) ** 2, axis=-1)
        out[lo : lo + step] = cand[np.argmin(metric, axis=-1)]
    return out.reshape(batch + (L,))


def viterbi_indices(taps, y, c, L):
    """Exact ML sequence detection over the zero-padded virtual ISI channel.

    ``y[n] = sum_k taps[k] s[n - k]`` for ``n = 0 .. L + K - 2`` with ``s``
    zero outside ``0 .. L-1``. The trellis starts and ends in the all-zero
    state; states hold the last ``K - 1`` symbols (newest as the least
    significant base-``mu`` digit).
    """
    taps = np.asarray(taps, dtype=complex)
    y = np.asarray(y, dtype=complex)
    batch = taps.shape[:-1]
    K = taps.shape[-1]
    taps = taps.reshape((-1, K))
    y = y.reshape((-1, y.shape[-1]))
    if y.shape[-1] != L + K - 1:
        raise ValueError(f"y must have length L + K - 1 = {L + K - 1}")
    mu = c.mu
    pts = c.points
    T = taps.shape[0]

    if K == 1:
        # memoryless: symbol-by-symbol decisions on y / tap
        score = np.abs(y[:, :, None] - taps[:, :1, None] * pts) ** 2
        return np.argmin(score, axis=-1).reshape(batch + (L,))

    S = mu ** (K - 1)
    if S > MAX_TRELLIS_STATES:
        raise CapacityError(f"trellis with mu^(K-1) = {S} states exceeds {MAX_TRELLIS_STATES}")
    states = np.arange(S)
    digits = (states[:, None] // mu ** np.arange(K - 1)) % mu  # (S, K-1), j=0 newest
    dvals = pts[digits]
    ns_pred = (np.arange(mu)[None, :] * mu ** (K - 2)) + (states // mu)[:, None]  # (S, q)
    ns_sym = states % mu

    metric = np.full((T, S), np.inf)
    metric[:, 0] = 0.0
    back = np.empty((L, T, S), dtype=np.int64)
    rows = np.arange(T)[:, None]
    lag = np.arange(K - 1)
    for n in range(L):
        vals = np.where(lag < n, dvals, 0)  # symbols before the block are zero
        isi = vals @ taps[:, 1:].T  # (S, T)
        pred = taps[:, 0, None, None] * pts[None, None, :] + isi.T[:, :, None]
        cand = metric[:, :, None] + np.abs(y[:, n, None, None] - pred) ** 2  # (T, S, mu)
        into = cand[:, ns_pred, ns_sym[:, None]]  # (T, S_next, q)
        q = np.argmin(into, axis=-1)
        metric = np.take_along_axis(into, q[..., None], axis=-1)[..., 0]
        back[n] = ns_pred[states[None, :], q]

    # flush: K - 1 trailing outputs carry only the tail of the block
    vals = np.where(lag < L, dvals, 0)
    for t in range(1, K):
        j = np.arange(K - t)
        tail = vals[:, j] @ taps[:, t + j].T  # (S, T)
        metric = metric + np.abs(y[:, L - 1 + t, None] - tail.T) ** 2

    state = np.argmin(metric, axis=-1)
    out = np.empty((T, L), dtype=np.int64)
    for n in range(L - 1, -1, -1):
        out[:, n] = state % mu
        state = back[n][rows[:, 0], state]
    return out.reshape(batch + (L,))


def toeplitz_taps(Hc, K):
    """Recover the ``K`` effective taps from the first column of a Toeplitz channel."""
    return np.asarray(Hc)[..., :K, 0]


# -- single-problem API ----------------------------------------------------


def _result(p, idx):
    idx = np.asarray(idx)
    return p.c.points[idx], indices_to_bits(p.c, idx)


def _require_rank(p):
    if not p.full_rank:
        raise SingularChannelError("equivalent channel is rank deficient")


def zf_detect(p):
    _require_rank(p)
    return _result(p, zf_indices(p.Hc, p.y, p.c))


def mmse_detect(p):
    return _result(p, mmse_indices(p.Hc, p.y, p.c, p.sigma2))


def zf_dfe_detect(p):
    _require_rank(p)
    return _result(p, zfdfe_indices(p.Hc, p.y, p.c))


def ml_detect_exhaustive(p):
    return _result(p, ml_exhaustive_indices(p.Hc, p.y, p.c))


def ml_detect_viterbi(p, code):
    N, L = p.Hc.shape
    if L != code.L or N != code.N:
        raise ValueError(f"channel shape {p.Hc.shape} does not match {code!r}")
    return _result(p, viterbi_indices(toeplitz_taps(p.Hc, code.K), p.y, p.c, L))


def detect_indices(token, Hc, y, c, sigma2=0.0):
    """Dispatch a batched detector by CLI token."""
    if token == "zf":
        return zf_indices(Hc, y, c)
    if token == "mmse":
        return mmse_indices(Hc, y, c, sigma2)
    if token == "zfdfe":
        return zfdfe_indices(Hc, y, c)
    if token == "ml":
        return ml_exhaustive_indices(Hc, y, c)
    if token == "viterbi":
        N, L = np.shape(Hc)[-2:]
        return viterbi_indices(toeplitz_taps(Hc, N - L + 1), y, c, L)
    raise ValueError(f"unknown detector {token!r}; expected one of {DETECTORS}")


# -- estimator API ---------------------------------------------------------


class BlockDetector(BaseEstimator):
    """Hard-decision receiver with an estimator interface.

    ``fit(Hc)`` binds the equivalent channel (``(N, L)`` or a batch
    ``(n, N, L)``); ``predict(y)`` returns decided symbols with the block
    shape of ``y``. ``method`` is one of ``zf``, ``mmse``, ``zfdfe``, ``ml``,
    ``viterbi``.
    """

    def __init__(self, method="zf", scheme="qam", mu=4, noise_var=0.0):
        self.method = method
        self.scheme = scheme
        self.mu = mu
        self.noise_var = noise_var

    def fit(self, Hc, y=None):
        if self.method not in DETECTORS:
            raise ValueError(f"unknown detector {self.method!r}; expected one of {DETECTORS}")
        Hc = np.asarray(Hc, dtype=complex)
        if Hc.ndim < 2 or Hc.shape[-2] < Hc.shape[-1]:
            raise ValueError(f"Hc must be (..., N, L) with N >= L, got {Hc.shape}")
        check_nonnegative(self.noise_var, "noise_var")
        self.constellation_ = make_constellation(self.scheme, self.mu)
        self.channel_ = Hc
        return self

    def predict_indices(self, y):
        check_is_fitted(self, "channel_")
        return detect_indices(
            self.method, self.channel_, np.asarray(y, dtype=complex),
            self.constellation_, self.noise_var,
        )

    def predict(self, y):
        return self.constellation_.points[self.predict_indices(y)]

    def predict_bits(self, y):
        return indices_to_bits(self.constellation_, self.predict_indices(y))

    def score(self, y, s):
        """Fraction of correctly decided symbols against the true blocks ``s``."""
        return float(np.mean(np.isclose(self.predict(y), s)))


class ZFDetector(BlockDetector):
    def __init__(self, scheme="qam", mu=4):
        super().__init__("zf", scheme, mu)


class MMSEDetector(BlockDetector):
    def __init__(self, scheme="qam", mu=4, noise_var=0.0):
        super().__init__("mmse", scheme, mu, noise_var)


class ZFDFEDetector(BlockDetector):
    def __init__(self, scheme="qam", mu=4):
        super().__init__("zfdfe", scheme, mu)


class MLDetector(BlockDetector):
    """Maximum-likelihood detector; ``search`` is ``exhaustive`` or ``viterbi``."""

    def __init__(self, scheme="qam", mu=4, search="viterbi"):
        self.search = search
        super().__init__("ml" if search == "exhaustive" else "viterbi", scheme, mu)
