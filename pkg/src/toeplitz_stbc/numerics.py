"""Quadrature, Gaussian tail functions and Hermitian matrix helpers."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import as_hermitian
from .exceptions import NumericalError

#: Gauss-Legendre order used for every angular integral in the package.
QUAD_POINTS = 128
RECONSTRUCTION_TOL = 1e-10
PSD_CLAMP_TOL = 1e-12


@lru_cache(maxsize=32)
def _leggauss(points):
    nodes, weights = np.polynomial.legendre.leggauss(points)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a, b, points=QUAD_POINTS):
    """Nodes and weights of the ``points``-order rule mapped onto ``[a, b]``."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if int(points) < 1:
        raise ValueError("points must be a positive integer")
    x, w = _leggauss(int(points))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def integrate(f, a, b, points=QUAD_POINTS):
    """Integrate ``f`` over ``[a, b]`` with fixed-order Gauss-Legendre.

    ``f`` is called once on the full node array. It may return an array of
    shape ``(points, ...)``, in which case every trailing slot is integrated
    independently.
    """
    nodes, weights = gauss_legendre(a, b, points)
    values = np.asarray(f(nodes))
    if values.shape[:1] != nodes.shape:
        # scalar-only integrand
        values = np.array([f(t) for t in nodes])
    if not np.all(np.isfinite(values)):
        raise NumericalError("integrand produced non-finite values")
    return np.tensordot(weights, values, axes=(0, 0))


def angular_rule(upper, width=None, points=QUAD_POINTS):
    """Composite Gauss-Legendre rule on ``[0, upper]`` graded toward zero.

    Integrands such as ``exp(-c / sin^2(t))`` or ``(1 + c / sin^2(t))^-1`` have
    a boundary layer of angular width about ``width = sqrt(c)`` at the origin.
    Panels ``[0, 4w], [4w, 16w], ...`` resolve it; without a small ``width``
    this is the plain single-panel rule.
    """
    edges = [0.0]
    if width is not None and width > 0:
        t = 4.0 * float(width)
        while t < upper / 2:
            edges.append(t)
            t *= 4.0
    edges.append(float(upper))
    parts = [gauss_legendre(a, b, points) for a, b in zip(edges[:-1], edges[1:])]
    nodes = np.concatenate([n for n, _ in parts])
    weights = np.concatenate([w for _, w in parts])
    return nodes, weights


def smallest_positive(values):
    values = np.asarray(values, dtype=float).ravel()
    values = values[values > 0]
    return float(values.min()) if values.size else None


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)) or np.any(z < 0):
        raise ValueError("Q-function argument must be non-negative")
    return z


def _craig(z, upper, points):
    z = _check_z(z)
    theta, w = angular_rule(upper, smallest_positive(z), points)
    s2 = np.sin(theta) ** 2
    vals = np.exp(-np.multiply.outer(z * z, 1.0 / (2.0 * s2)))
    out = vals @ w / np.pi
    return float(out) if out.ndim == 0 else out


def q_function(z, points=QUAD_POINTS):
    """Gaussian tail probability ``Q(z)`` via the finite-range angular form.

    Accepts a scalar or an array of non-negative arguments.
    """
    return _craig(z, np.pi / 2, points)


def q_squared(z, points=QUAD_POINTS):
    """``Q(z)**2`` from the angular integral over ``[0, pi/4]``."""
    return _craig(z, np.pi / 4, points)


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenpairs of a Hermitian matrix with eigenvalues sorted descending."""

    vectors: np.ndarray
    lambdas: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.lambdas) @ self.vectors.conj().T


def hermitian_eig(a):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The sort is stable, so tied eigenvalues keep LAPACK's vector order.
    """
    a = as_hermitian(a)
    a = 0.5 * (a + a.conj().T)
    lam, vec = np.linalg.eigh(a)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    vec = vec[:, order]
    lam.setflags(write=False)
    vec.setflags(write=False)
    return EigDecomposition(vectors=vec, lambdas=lam)


def psd_sqrt(a, eig=None):
    """Hermitian square root ``S`` with ``S @ S^H == a``.

    Eigenvalues in ``[-1e-12 * scale, 0)`` are clamped to zero; anything more
    negative is rejected.
    """
    if eig is None:
        eig = hermitian_eig(a)
    lam = np.array(eig.lambdas, dtype=float)
    scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    if lam.size and lam.min() < -PSD_CLAMP_TOL * scale:
        raise ValueError(f"matrix is not PSD: eigenvalue {lam.min():.3e}")
    lam = np.clip(lam, 0.0, None)
    v = eig.vectors
    return (v * np.sqrt(lam)) @ v.conj().T
