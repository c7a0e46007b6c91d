import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toeplitz_stbc.exceptions import ConfigError
from toeplitz_stbc.sim import (
    CSV_HEADER,
    PRESETS,
    CurveRecord,
    ExperimentConfig,
    emit_csv,
    parse_config,
    parse_snr,
    preset,
    read_csv,
    run_experiment,
    serialize_config,
    write_records,
)

SMALL = ExperimentConfig(m=2, k=2, l=3, mu=4, snr_db=(0.0, 6.0, 12.0), trials=2500, seed=9)


def csv_text(records):
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def test_noiseless_override_gives_zero_ber():
    for det in ("zf", "mmse", "zfdfe", "ml"):
        for rec in run_experiment(SMALL.replace(detector=det, trials=300), sigma2_override=0.0):
            assert rec.ber == 0 and rec.ser == 0


def test_record_invariants():
    for rec in run_experiment(SMALL.replace(mu=16)):
        assert rec.ber == rec.bit_errors / (rec.trials * 3 * 4)
        assert rec.ser == rec.symbol_errors / (rec.trials * 3)
        assert 0 <= rec.ber <= 1 and 0 <= rec.ser <= 1
        assert rec.redrawn == 0


def test_determinism_and_worker_invariance():
    a = csv_text(run_experiment(SMALL))
    b = csv_text(run_experiment(SMALL))
    c = csv_text(run_experiment(SMALL, workers=2))
    assert a == b == c
    assert csv_text(run_experiment(SMALL.replace(seed=10))) != a


def test_min_errors_rule_is_deterministic():
    cfg = SMALL.replace(trials=50_000, min_errors=200, snr_db=(10.0, 20.0))
    r1 = run_experiment(cfg)
    r2 = run_experiment(cfg, workers=3)
    assert r1 == r2
    assert r1[0].symbol_errors >= 200 and r1[0].trials < 50_000
    assert r1[1].trials <= 50_000


def test_curves_non_increasing_in_snr():
    cfg = ExperimentConfig(m=2, k=2, l=4, mu=16, snr_db=tuple(np.arange(0.0, 25.0, 3.0)), trials=3000, seed=2)
    recs = run_experiment(cfg)
    ser = np.array([r.ser for r in recs])
    sd = np.sqrt(ser * (1 - ser) / (cfg.trials * cfg.l))
    smooth = np.convolve(ser, np.ones(2) / 2, mode="valid")
    assert np.all(np.diff(smooth) <= 3 * sd[1:-1])


def test_constellation_ordering():
    base = ExperimentConfig(m=4, k=4, l=8, snr_db=(10.0, 16.0, 22.0), trials=3000, seed=4)
    ber = [np.array([r.ber for r in run_experiment(base.replace(mu=mu))]) for mu in (4, 16, 64)]
    assert np.all(ber[0] < ber[1]) and np.all(ber[1] < ber[2])


def test_presets():
    cons = preset("example1-constellations")
    assert [c.mu for c in cons] == [4, 16, 64]
    assert all((c.m, c.l, c.detector, c.scheme) == (4, 8, "zf", "qam") for c in cons)
    assert [c.l for c in preset("example1-lengths")] == [4, 8, 16, 32]
    ants = preset("example1-antennas")
    assert [c.m for c in ants] == [2, 4, 8] and {c.mu for c in ants} == {16} and {c.l for c in ants} == {8}
    ex2 = preset("example2-correlated")
    assert {(c.detector, c.beamformer) for c in ex2} == {
        (d, b) for d in ("zf", "ml") for b in ("identity", "waterfill", "exact")
    }
    assert all((c.delta_deg, c.dt_ratio, c.l, c.mu, c.channel) == (5.0, 0.5, 10, 4, "broadside") for c in ex2)
    with pytest.raises(ConfigError) as info:
        preset("example9")
    assert all(name in str(info.value) for name in PRESETS)


@pytest.mark.parametrize(
    "changes,field",
    [
        ({"k": 5}, "k"),
        ({"snr_db": (5.0, 5.0)}, "snr_db"),
        ({"snr_db": (6.0, 3.0)}, "snr_db"),
        ({"trials": 0}, "trials"),
        ({"mu": 8}, "mu"),
        ({"detector": "sphere"}, "detector"),
        ({"beamformer": "svd"}, "beamformer"),
        ({"channel": "rician"}, "channel"),
        ({"delta_deg": 200.0}, "delta_deg"),
        ({"min_errors": 0}, "min_errors"),
        ({"label": "a # b"}, "label"),
    ],
)
def test_config_errors_name_field(changes, field):
    with pytest.raises(ConfigError) as info:
        SMALL.replace(**changes)
    assert info.value.field == field


def test_csv_output(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    rec = CurveRecord(1.5, 10, 5, 4, 0.5, 0.1, 0, 2.0 / 3.0)
    emit_csv([rec], path)
    assert read_csv(path) == [rec]
    assert "0.66666666666666663" in path.read_text()
    with pytest.raises(OSError) as info:
        emit_csv([rec], tmp_path / "missing" / "x.csv")
    assert "missing" in str(info.value)


def test_run_experiment_writes_out(tmp_path):
    out = tmp_path / "curve.csv"
    recs = run_experiment(SMALL.replace(out=str(out), trials=200))
    assert read_csv(out) == recs


def test_parse_config_text():
    text = """
    # a comment
    m = 3
    k = 2   # inline comment
    snr_db = 0:5:20
    detector = mmse
    min_errors = none
    rate_match = true
    """
    cfg = parse_config(text)
    assert (cfg.m, cfg.k, cfg.detector, cfg.rate_match) == (3, 2, "mmse", True)
    assert cfg.snr_db == (0.0, 5.0, 10.0, 15.0, 20.0)
    with pytest.raises(ConfigError) as info:
        parse_config("colour = red")
    assert info.value.field == "colour" and "colour" in str(info.value)
    with pytest.raises(ConfigError):
        parse_config("m = four")


def test_parse_snr():
    assert parse_snr("0:2:6") == (0.0, 2.0, 4.0, 6.0)
    assert parse_snr("1.5, 3") == (1.5, 3.0)
    with pytest.raises(ConfigError):
        parse_snr("0:0:5")


configs = st.builds(
    lambda m, dk, l, scheme_mu, snr, trials, me, det, bf, ch, ratio, delta, seed, rm, label: ExperimentConfig(
        m=m, k=max(1, m - dk), l=l, scheme=scheme_mu[0], mu=scheme_mu[1],
        snr_db=tuple(np.cumsum(snr)), trials=trials, min_errors=me, detector=det, beamformer=bf,
        channel=ch, dt_ratio=ratio, delta_deg=delta, seed=seed, rate_match=rm, label=label,
    ),
    st.integers(1, 8), st.integers(0, 7), st.integers(1, 40),
    st.sampled_from([("qam", 4), ("qam", 64), ("pam", 8), ("psk", 2)]),
    st.lists(st.floats(0.001, 7.3), min_size=1, max_size=6),
    st.integers(1, 10**7), st.one_of(st.none(), st.integers(1, 1000)),
    st.sampled_from(["zf", "mmse", "zfdfe", "ml", "viterbi"]),
    st.sampled_from(["identity", "waterfill", "exact"]),
    st.sampled_from(["iid", "broadside"]),
    st.floats(0.01, 4.0), st.floats(0.0, 179.0), st.integers(0, 2**40), st.booleans(),
    st.text("abcdefgh-=+ 0123456789", max_size=12).map(str.strip),
)


@given(configs)
def test_config_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg


def test_zf_equals_ml_when_k_is_one():
    base = ExperimentConfig(m=4, k=1, l=6, snr_db=(0.0, 5.0), trials=2000, seed=5)
    assert run_experiment(base.replace(detector="zf")) == run_experiment(base.replace(detector="ml"))


def test_rate_matched_identity_tracks_waterfill_k():
    cfg = preset("example2-correlated")[0].replace(trials=10, snr_db=(4.0, 16.0))
    assert cfg.beamformer == "identity" and cfg.rate_match
    ks = [r.k for r in run_experiment(cfg)]
    wf = [r.k for r in run_experiment(cfg.replace(beamformer="waterfill", rate_match=False))]
    assert ks == wf == [1, 2]
