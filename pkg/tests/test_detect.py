import numpy as np
import pytest
from sklearn.base import clone

from toeplitz_stbc.detect import (
    DetectionProblem,
    MLDetector,
    MMSEDetector,
    ZFDetector,
    ml_detect_exhaustive,
    ml_detect_viterbi,
    ml_exhaustive_indices,
    mmse_detect,
    mmse_equalize,
    viterbi_indices,
    zf_detect,
    zf_dfe_detect,
    zf_equalize,
    gram_inverse_diagonal,
)
from toeplitz_stbc.exceptions import CapacityError, SingularChannelError
from toeplitz_stbc.modulation import make_constellation
from toeplitz_stbc.sim import ExperimentConfig, run_experiment
from toeplitz_stbc.stbc import ToeplitzCode, equivalent_channel

from conftest import crandn


def random_problem(rng, c, M, K, L, sigma2):
    code = ToeplitzCode(crandn(rng, K, M), L)
    Hc = equivalent_channel(code, crandn(rng, M))
    idx = rng.integers(0, c.mu, L)
    y = Hc @ c.points[idx] + np.sqrt(sigma2 / 2) * crandn(rng, Hc.shape[0])
    return code, DetectionProblem(Hc, y, sigma2, c), idx


def test_hand_solved_normal_equations():
    code = ToeplitzCode.identity(2, 2)
    Hc = equivalent_channel(code, [1, 1])
    assert np.allclose(Hc.conj().T @ Hc, [[2, 1], [1, 2]])
    # [[2,1],[1,2]] s = H^H y = [3, 3]  ->  s = [1, 1]
    assert np.allclose(zf_equalize(Hc, np.array([1, 2, 1])), [1, 1], atol=1e-12)


def test_zf_matches_least_squares_and_orthogonality(rng):
    for _ in range(50):
        Hc = crandn(rng, 7, 4)
        y = crandn(rng, 7)
        raw = zf_equalize(Hc, y)
        oracle = np.linalg.inv(Hc.conj().T @ Hc) @ Hc.conj().T @ y
        assert np.abs(raw - oracle).max() < 1e-10
        assert np.abs(Hc.conj().T @ (y - Hc @ raw)).max() < 1e-10
        g = gram_inverse_diagonal(Hc)
        assert np.allclose(g, np.diag(np.linalg.inv(Hc.conj().T @ Hc)).real)


def test_noiseless_perfection_all_detectors(rng):
    for scheme, mu in (("qam", 4), ("psk", 8), ("pam", 4)):
        c = make_constellation(scheme, mu)
        for _ in range(100):
            code, p, idx = random_problem(rng, c, 3, 2, 4, 0.0)
            for detect in (zf_detect, mmse_detect, zf_dfe_detect, ml_detect_exhaustive):
                assert np.array_equal(detect(p)[0], c.points[idx])
            assert np.array_equal(ml_detect_viterbi(p, code)[0], c.points[idx])


def test_bits_returned(rng):
    c = make_constellation("qam", 16)
    _, p, idx = random_problem(rng, c, 2, 2, 3, 0.0)
    symbols, bits = zf_detect(p)
    assert bits.shape == (3 * 4,)


def test_singular_channel_raises():
    c = make_constellation("qam", 4)
    p = DetectionProblem(np.zeros((3, 2)), np.zeros(3), 0.1, c)
    for detect in (zf_detect, zf_dfe_detect):
        with pytest.raises(SingularChannelError):
            detect(p)
    assert not p.full_rank


def test_problem_validation():
    c = make_constellation("qam", 4)
    with pytest.raises(ValueError):
        DetectionProblem(np.ones((2, 3)), np.ones(2), 0.1, c)
    with pytest.raises(ValueError):
        DetectionProblem(np.eye(3, 2), np.ones(2), 0.1, c)


def test_mmse_limits(rng):
    Hc, y = crandn(rng, 6, 3), crandn(rng, 6)
    assert np.abs(mmse_equalize(Hc, y, 1e-12, 2.0) - zf_equalize(Hc, y)).max() < 1e-8
    assert np.linalg.norm(mmse_equalize(Hc, y, 1e6, 2.0)) < 1e-3 * np.linalg.norm(zf_equalize(Hc, y))


def test_zfdfe_equals_zf_for_single_symbol(rng):
    c = make_constellation("qam", 16)
    for _ in range(100):
        _, p, _ = random_problem(rng, c, 3, 3, 1, 5.0)
        assert np.array_equal(zf_dfe_detect(p)[0], zf_detect(p)[0])


def test_exhaustive_matches_enumeration(rng):
    c = make_constellation("psk", 2)
    import itertools

    cands = np.array(list(itertools.product(range(2), repeat=3)))
    for _ in range(1000):
        Hc, y = crandn(rng, 4, 3), crandn(rng, 4)
        metric = [np.linalg.norm(y - Hc @ c.points[s]) for s in cands]
        assert np.array_equal(ml_exhaustive_indices(Hc, y, c), cands[int(np.argmin(metric))])


def test_viterbi_equals_exhaustive(rng):
    for mu in (2, 4):
        c = make_constellation("qam" if mu == 4 else "psk", mu)
        for K in (2, 3):
            for _ in range(150):
                L = int(rng.integers(1, 7))
                code, p, _ = random_problem(rng, c, 3, K, L, float(rng.choice([0.1, 1.0, 4.0])))
                assert np.array_equal(ml_detect_viterbi(p, code)[0], ml_detect_exhaustive(p)[0])


def test_viterbi_k1_is_symbolwise(rng):
    c = make_constellation("qam", 16)
    taps = crandn(rng, 1)
    y = crandn(rng, 6) * 3
    got = viterbi_indices(taps, y, c, 6)
    want = [np.argmin(np.abs(v - taps[0] * c.points)) for v in y]
    assert np.array_equal(got, want)


def test_capacity_guards():
    c = make_constellation("qam", 16)
    with pytest.raises(CapacityError):
        ml_exhaustive_indices(np.eye(6, 6), np.zeros(6), c)
    with pytest.raises(CapacityError):
        viterbi_indices(np.ones(6), np.zeros(10), make_constellation("qam", 16), 5)


def test_estimators(rng):
    c = make_constellation("qam", 4)
    code, p, idx = random_problem(rng, c, 2, 2, 3, 0.0)
    for est in (ZFDetector(), MMSEDetector(noise_var=0.1), MLDetector(), MLDetector(search="exhaustive")):
        est = clone(est).fit(p.Hc)
        assert np.array_equal(est.predict(p.y), c.points[idx])
        assert est.score(p.y, c.points[idx]) == 1.0
    assert MLDetector().get_params()["search"] == "viterbi"


def test_performance_ordering():
    base = ExperimentConfig(m=2, k=2, l=4, mu=16, snr_db=(16.0,), trials=6000, seed=11)
    ser = {d: run_experiment(base.replace(detector=d))[0] for d in ("zf", "mmse", "zfdfe", "ml")}
    n = base.trials * base.l

    def below(a, b):
        pa, pb = ser[a].ser, ser[b].ser
        sd = np.sqrt((pa * (1 - pa) + pb * (1 - pb)) / n)
        return pa <= pb + 1.96 * sd

    assert below("ml", "zfdfe") and below("zfdfe", "zf") and below("mmse", "zf") and below("ml", "zf")
