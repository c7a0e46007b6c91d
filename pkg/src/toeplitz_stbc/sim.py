"""Monte Carlo BER/SER sweeps, scenario presets, config files and CSV output.

SNR points are per-symbol ``E_s / N0`` in dB, where ``N0`` is the complex
noise variance per received sample. ML-oriented beamformer designs are
re-solved at every SNR point with per-real-dimension noise ``N0 / 2``.

Trials are split into fixed-size chunks. Chunk ``j`` of SNR point ``i``
draws from ``SeedSequence(seed, spawn_key=(i, j))``, so results depend only
on the configuration, never on how many workers run the chunks.
"""

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel, block_snr, complex_normal, linear_to_db
from .design import METHODS, design_beamformer, optimize_waterfill
from .detect import DETECTORS, mmse_indices, singular_mask, viterbi_indices, zf_indices, zfdfe_indices
from .exceptions import ConfigError
from .modulation import SCHEMES, _validate_mu, indices_to_bits, make_constellation
from .stbc import ToeplitzCode, encode, equivalent_channel

CHUNK_TRIALS = 1000
CHANNELS = ("iid", "broadside")
CSV_HEADER = ("snr_db", "trials", "bit_errors", "symbol_errors", "ber", "ser", "redrawn", "block_snr_db")


@dataclass(frozen=True)
class ExperimentConfig:
    """One BER/SER curve.

    With ``min_errors`` set, each point runs until that many symbol errors
    are seen or ``trials`` is reached. ``rate_match`` makes the identity
    beamformer take the water-filling ``K`` at each SNR point.
    """

    m: int = 4
    k: int = 4
    l: int = 8  # noqa: E741
    scheme: str = "qam"
    mu: int = 4
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 10_000
    min_errors: int | None = None
    detector: str = "zf"
    beamformer: str = "identity"
    channel: str = "iid"
    dt_ratio: float = 0.5
    delta_deg: float = 5.0
    seed: int = 0
    out: str | None = None
    rate_match: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(x) for x in np.atleast_1d(self.snr_db)))
        validate_config(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _require(ok, name, message):
    if not ok:
        raise ConfigError(f"{name}: {message}", field=name)


def _text_ok(s):
    return "#" not in s and "\n" not in s and s == s.strip()


def validate_config(cfg):
    for name in ("m", "k", "l", "mu", "trials", "seed"):
        v = getattr(cfg, name)
        _require(isinstance(v, (int, np.integer)) and not isinstance(v, bool), name, "must be an integer")
    _require(cfg.m >= 1, "m", "must be at least 1")
    _require(1 <= cfg.k <= cfg.m, "k", f"need 1 <= k <= m = {cfg.m}")
    _require(cfg.l >= 1, "l", "must be at least 1")
    _require(cfg.scheme in SCHEMES, "scheme", f"expected one of {SCHEMES}")
    try:
        _validate_mu(cfg.scheme, cfg.mu)
    except ValueError as err:
        raise ConfigError(f"mu: {err}", field="mu") from None
    snr = np.asarray(cfg.snr_db)
    _require(snr.size >= 1 and np.all(np.isfinite(snr)), "snr_db", "need finite values")
    _require(np.all(np.diff(snr) > 0), "snr_db", "must be strictly increasing")
    _require(cfg.trials >= 1, "trials", "must be at least 1")
    _require(cfg.min_errors is None or (isinstance(cfg.min_errors, int) and cfg.min_errors >= 1),
             "min_errors", "must be a positive integer")
    _require(cfg.detector in DETECTORS, "detector", f"expected one of {DETECTORS}")
    _require(cfg.beamformer in METHODS, "beamformer", f"expected one of {METHODS}")
    _require(cfg.channel in CHANNELS, "channel", f"expected one of {CHANNELS}")
    _require(math.isfinite(cfg.dt_ratio) and cfg.dt_ratio > 0, "dt_ratio", "must be positive")
    _require(0 <= cfg.delta_deg < 180, "delta_deg", "must lie in [0, 180)")
    _require(cfg.seed >= 0, "seed", "must be non-negative")
    _require(cfg.out is None or (cfg.out != "" and _text_ok(cfg.out)), "out", "invalid path")
    _require(isinstance(cfg.rate_match, bool), "rate_match", "must be a boolean")
    _require(isinstance(cfg.label, str) and _text_ok(cfg.label), "label",
             "must be one line without '#' or surrounding whitespace")


@dataclass(frozen=True)
class CurveRecord:
    snr_db: float
    trials: int
    bit_errors: int
    symbol_errors: int
    ber: float
    ser: float
    redrawn: int
    block_snr_db: float
    k: int | None = field(default=None, compare=False)

    def ser_std(self, L):
        """Binomial standard deviation of ``ser`` over ``trials * L`` symbols."""
        n = self.trials * L
        return math.sqrt(max(self.ser * (1 - self.ser), 0.0) / n)

    def ber_std(self, bits_per_block):
        n = self.trials * bits_per_block
        return math.sqrt(max(self.ber * (1 - self.ber), 0.0) / n)


# -- simulation -------------------------------------------------------------


def channel_model(cfg):
    if cfg.channel == "iid":
        return ChannelModel.iid(cfg.m)
    return ChannelModel.broadside(cfg.m, cfg.dt_ratio, cfg.delta_deg)


def noise_power(c, snr_db):
    """Complex noise variance ``N0`` for per-symbol SNR ``E_s / N0`` in dB."""
    return c.avg_energy * 10.0 ** (-snr_db / 10.0)


def point_design(cfg, model, c, snr_db):
    """Transmission matrix used at one SNR point."""
    sigma2 = noise_power(c, snr_db) / 2.0
    if cfg.beamformer == "identity":
        K = cfg.k
        if cfg.rate_match:
            K = optimize_waterfill(model.sigma_cov, c.d_min, sigma2).K
        return design_beamformer("identity", model.sigma_cov, K=K)
    return design_beamformer(cfg.beamformer, model.sigma_cov, c.d_min, sigma2)


def _detect(token, code, Hc, taps, y, c, n0):
    if token in ("ml", "viterbi"):
        # the equivalent channel is Toeplitz, so sequence ML is exact ML
        return viterbi_indices(taps, y, c, code.L)
    if token == "zf":
        return zf_indices(Hc, y, c)
    if token == "mmse":
        return mmse_indices(Hc, y, c, n0)
    return zfdfe_indices(Hc, y, c)


def _run_chunk(task):
    cfg, B, n0, snr_idx, chunk_idx, n = task
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(snr_idx, chunk_idx)))
    model = channel_model(cfg)
    c = make_constellation(cfg.scheme, cfg.mu)
    code = ToeplitzCode(B, cfg.l)
    h = model.sample(rng, n)
    redrawn = 0
    while True:
        Hc = equivalent_channel(code, h)
        bad = singular_mask(np.linalg.qr(Hc, mode="r"))
        if not bad.any():
            break
        redrawn += int(bad.sum())
        h[bad] = model.sample(rng, int(bad.sum()))
    taps = h @ B.T
    idx = rng.integers(0, c.mu, size=(n, cfg.l))
    X = encode(code, c.points[idx])
    y = np.einsum("tnm,tm->tn", X, h)
    if n0 > 0:
        y = y + complex_normal(rng, y.shape, n0)
    got = _detect(cfg.detector, code, Hc, taps, y, c, n0)
    sym_err = int(np.count_nonzero(got != idx))
    bit_err = int(np.count_nonzero(indices_to_bits(c, got) != indices_to_bits(c, idx)))
    return bit_err, sym_err, redrawn


def _chunk_sizes(trials):
    full, rest = divmod(trials, CHUNK_TRIALS)
    return [CHUNK_TRIALS] * full + ([rest] if rest else [])


def run_experiment(cfg, sigma2_override=None, workers=1):
    """Simulate every SNR point of ``cfg`` and return one ``CurveRecord`` each.

    ``sigma2_override`` replaces the complex noise variance at every point
    (designs still use the nominal SNR). ``workers > 1`` runs chunks in
    separate processes without changing the result.
    """
    if not isinstance(cfg, ExperimentConfig):
        raise ConfigError("expected an ExperimentConfig", field="cfg")
    model = channel_model(cfg)
    c = make_constellation(cfg.scheme, cfg.mu)
    bps = c.bits_per_symbol
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    mapper = pool.map if pool else map
    records = []
    try:
        for i, snr in enumerate(cfg.snr_db):
            design = point_design(cfg, model, c, snr)
            n0 = noise_power(c, snr) if sigma2_override is None else float(sigma2_override)
            sizes = _chunk_sizes(cfg.trials)
            trials = bits = syms = redrawn = 0
            wave = max(1, workers)
            j = 0
            while j < len(sizes):
                tasks = [(cfg, design.B, n0, i, jj, sizes[jj]) for jj in range(j, min(j + wave, len(sizes)))]
                stop = False
                for (_, _, _, _, jj, n), (b, s, r) in zip(tasks, mapper(_run_chunk, tasks)):
                    trials, bits, syms, redrawn = trials + n, bits + b, syms + s, redrawn + r
                    if cfg.min_errors is not None and syms >= cfg.min_errors:
                        stop = True
                        break
                if stop:
                    break
                j += wave
            N = design.K + cfg.l - 1
            block = block_snr(cfg.scheme, cfg.mu, cfg.m, cfg.l, N, noise_power(c, snr))
            records.append(
                CurveRecord(
                    snr_db=float(snr),
                    trials=trials,
                    bit_errors=bits,
                    symbol_errors=syms,
                    ber=bits / (trials * cfg.l * bps),
                    ser=syms / (trials * cfg.l),
                    redrawn=redrawn,
                    block_snr_db=float(linear_to_db(block.block_snr)),
                    k=design.K,
                )
            )
    finally:
        if pool:
            pool.shutdown()
    if cfg.out:
        emit_csv(records, cfg.out)
    return records


# -- presets ----------------------------------------------------------------

_E1_SNR = tuple(float(x) for x in range(0, 31, 2))
_E2_SNR = tuple(float(x) for x in range(0, 21, 2))


def _example1_constellations():
    base = ExperimentConfig(m=4, k=4, l=8, snr_db=_E1_SNR, detector="zf")
    return [base.replace(mu=mu, label=f"{mu}-QAM") for mu in (4, 16, 64)]


def _example1_lengths():
    base = ExperimentConfig(m=4, k=4, mu=16, snr_db=_E1_SNR, detector="zf")
    return [base.replace(l=L, label=f"L={L}") for L in (4, 8, 16, 32)]


def _example1_antennas():
    base = ExperimentConfig(l=8, mu=16, snr_db=_E1_SNR, detector="zf")
    return [base.replace(m=M, k=M, label=f"M={M}") for M in (2, 4, 8)]


def _example2_correlated():
    base = ExperimentConfig(m=4, k=4, l=10, mu=4, snr_db=_E2_SNR, channel="broadside",
                            dt_ratio=0.5, delta_deg=5.0)
    out = []
    for det in ("zf", "ml"):
        out.append(base.replace(detector=det, beamformer="identity", rate_match=True,
                                label=f"{det} identity"))
        for bf in ("exact", "waterfill"):
            out.append(base.replace(detector=det, beamformer=bf, label=f"{det} {bf}"))
    return out


PRESETS = {
    "example1-constellations": _example1_constellations,
    "example1-lengths": _example1_lengths,
    "example1-antennas": _example1_antennas,
    "example2-correlated": _example2_correlated,
}


def preset(name):
    """Curves of a named scenario, one ``ExperimentConfig`` per curve."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}", field="preset") from None


# -- serialization ----------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_records(records, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def emit_csv(records, path):
    """Write records with 17 significant digits; empty input gives a header-only file."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_records(records, fh)
    except OSError as err:
        raise OSError(err.errno, f"cannot write {path}: {err.strerror}") from err


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ints = {"trials", "bit_errors", "symbol_errors", "redrawn"}
    return [CurveRecord(**{k: int(v) if k in ints else float(v) for k, v in row.items()}) for row in rows]


def parse_snr(text):
    """``start:step:stop`` (inclusive) or a comma-separated list of dB values."""
    text = text.strip()
    if ":" in text:
        try:
            start, step, stop = (float(p) for p in text.split(":"))
        except ValueError:
            raise ConfigError(f"snr_db: bad range {text!r}", field="snr_db") from None
        _require(step > 0, "snr_db", "range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        _require(n >= 1, "snr_db", "empty range")
        return tuple(start + step * i for i in range(n))
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"snr_db: bad list {text!r}", field="snr_db") from None


def _convert(name, ftype, raw):
    raw = raw.strip()
    try:
        if name == "snr_db":
            return parse_snr(raw)
        if "None" in str(ftype) and raw.lower() == "none":
            return None
        if "bool" in str(ftype):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if "int" in str(ftype):
            return int(raw)
        if "float" in str(ftype):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}", field=name) from None


_FIELDS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def parse_config_values(text):
    """Parse ``key = value`` lines into a dict of typed overrides."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", field=None)
        key, raw = (p.strip() for p in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}", field=key)
        values[key] = _convert(key, _FIELDS[key], raw)
    return values


def parse_config(text, base=None):
    values = parse_config_values(text)
    return (base or ExperimentConfig()).replace(**values) if base else ExperimentConfig(**values)


def serialize_config(cfg):
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if name == "snr_db":
            text = ", ".join(_fmt(x) for x in v)
        elif v is None:
            text = "none"
        elif isinstance(v, str):
            text = v
        else:
            text = _fmt(v)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
