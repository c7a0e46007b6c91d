"""QAM, PAM and PSK constellations with Gray labelling.

Point coordinates follow fixed energy normalizations:

* square QAM sits on the odd-integer lattice, so ``E_s = 2(mu - 1)/3`` and
  ``d_min = 2``;
* PAM sits on odd multiples of ``sqrt(2)/2``, so ``E_s = (mu**2 - 1)/6`` and
  ``d_min = sqrt(2)``;
* PSK is on the unit circle, ``E_s = 1``.

``points[k]`` is the point whose bit label is the binary expansion of ``k``
(most significant bit first), which makes bit mapping a plain index lookup.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

SCHEMES = ("qam", "pam", "psk")


def _gray(n):
    return n ^ (n >> 1)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _validate_mu(scheme, mu):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if isinstance(mu, bool) or int(mu) != mu:
        raise ValueError(f"mu must be an integer, got {mu!r}")
    mu = int(mu)
    if scheme == "qam":
        side = int(round(np.sqrt(mu)))
        if mu < 4 or side * side != mu or not _is_pow2(mu):
            raise ValueError(f"square QAM needs mu = 4, 16, 64, ...; got {mu}")
    elif mu < 2 or not _is_pow2(mu):
        raise ValueError(f"{scheme.upper()} needs mu a power of two >= 2; got {mu}")
    return mu


def _pam_levels(m):
    # level of Gray-labelled index k, on the odd integers
    levels = np.empty(m)
    for pos in range(m):
        levels[_gray(pos)] = 2 * pos - m + 1
    return levels


@dataclass(frozen=True, eq=False)
class Constellation:
    """A finite signal set with a Gray bit labelling."""

    scheme: str
    mu: int
    points: np.ndarray
    avg_energy: float
    d_min: float

    @property
    def bits_per_symbol(self):
        return int(self.mu).bit_length() - 1

    @property
    def labels(self):
        """Bit table of shape ``(mu, bits_per_symbol)``; row ``k`` labels ``points[k]``."""
        k = self.bits_per_symbol
        idx = np.arange(self.mu)
        return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)

    def __repr__(self):
        return f"Constellation({self.scheme!r}, {self.mu})"


def make_constellation(scheme, mu):
    """Build the ``mu``-point constellation of the given scheme (``qam``, ``pam``, ``psk``)."""
    scheme = str(scheme).lower()
    mu = _validate_mu(scheme, mu)
    if scheme == "qam":
        side = int(round(np.sqrt(mu)))
        half = side.bit_length() - 1
        axis = _pam_levels(side)
        idx = np.arange(mu)
        points = axis[idx >> half] + 1j * axis[idx & (side - 1)]
        energy = 2.0 * (mu - 1) / 3.0
        d_min = 2.0
    elif scheme == "pam":
        points = _pam_levels(mu) * (np.sqrt(2.0) / 2.0) + 0j
        energy = (mu * mu - 1) / 6.0
        d_min = np.sqrt(2.0)
    else:
        points = np.empty(mu, dtype=complex)
        for pos in range(mu):
            points[_gray(pos)] = np.exp(2j * np.pi * pos / mu)
        energy = 1.0
        d_min = 2.0 * np.sin(np.pi / mu)
    points.setflags(write=False)
    return Constellation(scheme, mu, points, float(energy), float(d_min))


def bits_to_indices(c, bits):
    bits = np.asarray(bits, dtype=np.int64)
    k = c.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(
            f"bit count {bits.shape[-1]} is not a multiple of {k} bits per symbol"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    groups = bits.reshape(bits.shape[:-1] + (-1, k))
    return groups @ (1 << np.arange(k - 1, -1, -1))


def indices_to_bits(c, indices):
    indices = np.asarray(indices, dtype=np.int64)
    bits = c.labels[indices]
    return bits.reshape(indices.shape[:-1] + (-1,)) if indices.ndim else bits


def modulate(c, bits):
    """Map a bit sequence (or a batch of them along the last axis) to symbols."""
    return c.points[bits_to_indices(c, bits)]


def nearest_indices(c, z):
    """Index of the closest constellation point for every entry of ``z``.

    ``argmin`` returns the first minimum, so ties go to the lowest index.
    """
    z = np.asarray(z, dtype=complex)
    dist = np.abs(z[..., None] - c.points)
    return np.argmin(dist, axis=-1)


def slice(c, z):  # noqa: A001 - mirrors the decision-device name
    """Minimum-distance decision for a scalar ``z``; returns ``(point, bits)``."""
    k = int(nearest_indices(c, complex(z)))
    return c.points[k], c.labels[k].copy()


def demodulate(c, z):
    """Hard decisions and bits for an array of soft symbol estimates."""
    idx = nearest_indices(c, z)
    return c.points[idx], indices_to_bits(c, idx)


class SymbolMapper(TransformerMixin, BaseEstimator):
    """Bits-to-symbols transformer.

    ``transform`` takes a ``(n_blocks, n_bits)`` 0/1 array and returns
    ``(n_blocks, n_bits // bits_per_symbol)`` complex symbols;
    ``inverse_transform`` slices soft symbols back to bits.
    """

    def __init__(self, scheme="qam", mu=4):
        self.scheme = scheme
        self.mu = mu

    def fit(self, X=None, y=None):
        self.constellation_ = make_constellation(self.scheme, self.mu)
        return self

    def transform(self, X):
        check_is_fitted(self, "constellation_")
        return modulate(self.constellation_, np.atleast_2d(X))

    def inverse_transform(self, X):
        check_is_fitted(self, "constellation_")
        _, bits = demodulate(self.constellation_, np.atleast_2d(X))
        return bits
