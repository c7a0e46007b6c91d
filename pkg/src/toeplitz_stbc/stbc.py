"""Toeplitz space-time block code: generator, codewords, equivalent channel.

A block of ``L`` symbols is spread over ``N = K + L - 1`` channel uses by the
banded shift matrix ``T(s, L, K)`` (``N x K``) and steered onto ``M`` antennas
by a ``K x M`` transmission matrix ``B``. Seen from the receiver, the same
block goes through the ``N x L`` banded matrix built from the effective taps
``B @ h``.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_complex_matrix, as_complex_vector

RANK_TOL = 1e-10
POWER_TOL = 1e-12


def toeplitz_matrix(alpha, L, K):
    """``(K + L - 1) x K`` matrix with ``alpha`` running down each column.

    Entry ``(i, j)`` (1-based) is ``alpha[i - j + 1]`` when ``0 <= i - j < L``
    and zero otherwise. ``alpha`` may carry leading batch axes.
    """
    alpha = np.asarray(alpha, dtype=complex)
    L, K = int(L), int(K)
    if alpha.ndim == 0 or alpha.shape[-1] == 0:
        raise ValueError("alpha must be a non-empty vector")
    if alpha.shape[-1] != L:
        raise ValueError(f"alpha has length {alpha.shape[-1]}, expected L={L}")
    if K < 1:
        raise ValueError("K must be a positive integer")
    out = np.zeros(alpha.shape[:-1] + (K + L - 1, K), dtype=complex)
    for j in range(K):
        out[..., j : j + L, j] = alpha
    return out


@dataclass(frozen=True, eq=False)
class ToeplitzCode:
    """Code geometry plus the ``K x M`` transmission matrix ``B``."""

    B: np.ndarray
    L: int

    def __post_init__(self):
        B = as_complex_matrix(self.B, "B")
        if int(self.L) < 1:
            raise ValueError("L must be a positive integer")
        K, M = B.shape
        if K > M:
            raise ValueError(f"B must have K <= M rows, got {B.shape}")
        if np.linalg.svd(B, compute_uv=False).min() <= RANK_TOL:
            raise ValueError("B must have full row rank K")
        B = B.copy()
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "L", int(self.L))

    @classmethod
    def identity(cls, M, L, K=None):
        """Unscaled ``[I_K | 0]`` code (``K = M`` by default)."""
        K = M if K is None else K
        return cls(np.eye(K, M), L)

    @property
    def K(self):
        return self.B.shape[0]

    @property
    def M(self):
        return self.B.shape[1]

    @property
    def N(self):
        return self.K + self.L - 1

    @property
    def power(self):
        return float(np.real(np.trace(self.B.conj().T @ self.B)))

    def __repr__(self):
        return f"ToeplitzCode(M={self.M}, K={self.K}, L={self.L}, N={self.N})"


def encode(code, s):
    """Codeword ``T(s, L, K) @ B`` of shape ``(N, M)``; ``s`` may be batched."""
    s = np.asarray(s, dtype=complex)
    if s.ndim == 0 or s.shape[-1] != code.L:
        raise ValueError(f"symbol vector must have length L={code.L}")
    return toeplitz_matrix(s, code.L, code.K) @ code.B


def effective_taps(code, h):
    """Taps ``B @ h`` of the virtual ISI channel; ``h`` may be batched."""
    h = np.asarray(h, dtype=complex)
    if h.ndim == 0 or h.shape[-1] != code.M:
        raise ValueError(f"channel vector must have length M={code.M}")
    return h @ code.B.T


def equivalent_channel(code, h):
    """``N x L`` matrix ``T(B h, K, L)`` with ``encode(s) @ h == it @ s``."""
    return toeplitz_matrix(effective_taps(code, h), code.K, code.L)


def symbol_rate(code_or_K, L=None):
    """Symbols per channel use, ``L / (K + L - 1)``, as an exact fraction."""
    if L is None:
        K, L = code_or_K.K, code_or_K.L
    else:
        K = code_or_K
    return Fraction(int(L), int(K) + int(L) - 1)


class ToeplitzEncoder(TransformerMixin, BaseEstimator):
    """Transformer from symbol blocks ``(n, L)`` to codewords ``(n, N, M)``.

    ``fit`` accepts an optional transmission matrix ``B``; without one the
    unscaled identity ``[I_K | 0]`` is used.
    """

    def __init__(self, M=2, K=None, L=2):
        self.M = M
        self.K = K
        self.L = L

    def fit(self, X=None, y=None, B=None):
        if B is None:
            self.code_ = ToeplitzCode.identity(self.M, self.L, self.K)
        else:
            self.code_ = ToeplitzCode(B, self.L)
        return self

    def transform(self, X):
        return encode(self.code_, np.atleast_2d(X))
