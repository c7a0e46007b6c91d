"""Input checks for complex vectors and matrices.

scikit-learn's ``check_array`` rejects complex input, so the estimators in
this package validate through these helpers instead.
"""

import numpy as np

HERMITIAN_TOL = 1e-12


def as_complex_vector(x, name="x", length=None):
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_complex_matrix(a, name="A", shape=None):
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if shape is not None:
        rows, cols = shape
        if (rows is not None and arr.shape[0] != rows) or (
            cols is not None and arr.shape[1] != cols
        ):
            raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_hermitian(a, name="A", tol=HERMITIAN_TOL):
    """Return ``a`` as a square complex array after checking Hermitian symmetry.

    The tolerance is relative to the largest entry magnitude (absolute when
    the matrix is zero).
    """
    arr = as_complex_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
    if np.max(np.abs(arr - arr.conj().T), initial=0.0) > tol * scale:
        raise ValueError(f"{name} is not Hermitian within {tol:g}")
    return arr


def check_positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not value >= 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be non-negative and finite, got {value}")
    return value
