import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toeplitz_stbc.exceptions import NumericalError
from toeplitz_stbc.numerics import (
    angular_rule,
    hermitian_eig,
    integrate,
    psd_sqrt,
    q_function,
    q_squared,
)
from toeplitz_stbc.channel import correlation_broadside

from conftest import crandn


def q_oracle(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def test_integrate_constant_and_sin2():
    assert integrate(lambda t: np.ones_like(t), 0, np.pi / 2, 64) == pytest.approx(np.pi / 2, abs=1e-14)
    assert integrate(lambda t: np.sin(t) ** 2, 0, np.pi / 2, 64) == pytest.approx(np.pi / 4, abs=1e-14)


def test_integrate_self_consistency():
    f = lambda t: np.exp(-1.0 / (2 * np.sin(t) ** 2))  # noqa: E731
    assert abs(integrate(f, 0, np.pi / 2, 64) - integrate(f, 0, np.pi / 2, 128)) < 1e-12


def test_integrate_rejects_non_finite():
    with pytest.raises(NumericalError):
        integrate(lambda t: np.full_like(t, np.inf), 0, 1)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_linear_and_monotone(a, b):
    f = lambda t: np.cos(t)  # noqa: E731
    g = lambda t: t**2  # noqa: E731
    lhs = integrate(lambda t: a * f(t) + b * g(t), 0, 1)
    assert lhs == pytest.approx(a * integrate(f, 0, 1) + b * integrate(g, 0, 1), abs=1e-12)
    assert integrate(np.sin, 0, 1) <= integrate(lambda t: t, 0, 1) + 1e-12


def test_q_function_examples():
    assert q_function(0.0) == pytest.approx(0.5, abs=1e-15)
    assert q_function(1.0) == pytest.approx(0.15865525393145707, abs=1e-12)
    assert q_function(8.0) <= math.exp(-32.0)
    assert q_squared(0.0) == pytest.approx(0.25, abs=1e-15)
    assert q_squared(1.0) == pytest.approx(q_oracle(1.0) ** 2, abs=1e-12)
    assert q_squared(1.0) == pytest.approx(0.025171, abs=1e-6)


def test_q_rejects_negative():
    with pytest.raises(ValueError):
        q_function(-0.1)
    with pytest.raises(ValueError):
        q_squared(-1.0)


def test_q_against_erfc_dense_grid():
    z = np.concatenate([np.geomspace(1e-8, 0.1, 200), np.linspace(0.1, 10, 400)])
    ref = np.array([q_oracle(v) for v in z])
    assert np.max(np.abs(q_function(z) - ref)) < 1e-10
    assert np.max(np.abs(q_squared(z) - ref**2)) < 1e-10


def test_q_squared_identity_grid():
    for z in np.arange(0.1, 3.0001, 0.1):
        assert abs(q_squared(z) - q_function(z) ** 2) < 1e-10


def test_q_doubling_points_is_stable():
    z = np.linspace(0, 6, 61)
    assert np.max(np.abs(q_function(z, 128) - q_function(z, 256))) < 1e-10


def test_angular_rule_resolves_thin_boundary_layer():
    c = 1e-12
    theta, w = angular_rule(np.pi / 2, np.sqrt(c))
    got = w @ (np.sin(theta) ** 2 / (np.sin(theta) ** 2 + c))
    # exact: pi/2 * (1 - sqrt(c / (1 + c)))
    assert got == pytest.approx(np.pi / 2 * (1 - np.sqrt(c / (1 + c))), abs=1e-13)


def test_hermitian_eig_examples():
    e = hermitian_eig(np.eye(3))
    assert np.allclose(e.lambdas, 1)
    assert np.allclose(e.vectors.conj().T @ e.vectors, np.eye(3), atol=1e-12)
    assert np.allclose(hermitian_eig(np.diag([1.0, 4.0])).lambdas, [4, 1])


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eig(np.array([[1, 2], [0, 1]], dtype=complex))


@given(st.integers(1, 16), st.integers(0, 2**31))
def test_hermitian_eig_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    a = crandn(rng, n, n)
    a = a + a.conj().T
    e = hermitian_eig(a)
    assert np.all(np.diff(e.lambdas) <= 0)
    assert np.linalg.norm(e.reconstruct() - a) <= 1e-10 * max(1.0, np.linalg.norm(a))


def test_hermitian_eig_random_psd(rng):
    g = crandn(rng, 4, 4)
    a = g @ g.conj().T
    e = hermitian_eig(a)
    assert np.all(e.lambdas >= 0)
    assert np.abs(e.vectors @ np.diag(e.lambdas) @ e.vectors.conj().T - a).max() < 1e-10


def test_psd_sqrt_examples():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    sigma = correlation_broadside(4, 0.5, np.deg2rad(5))
    s = psd_sqrt(sigma)
    assert np.abs(s @ s.conj().T - sigma).max() < 1e-10


def test_psd_sqrt_clamps_and_rejects():
    s = psd_sqrt(np.diag([1.0, -1e-14]))
    assert np.allclose(s @ s.conj().T, np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -1e-3]))
