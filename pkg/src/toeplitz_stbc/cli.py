"""Command line entry point: ``toeplitz-stbc {ber,design,constants}``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
or convergence failures.
"""

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from .analytics import ToeplitzFamily, estimate_constants
from .channel import correlation_broadside
from .design import METHODS, design_beamformer
from .detect import DETECTORS
from .exceptions import CapacityError, ConfigError, NumericalError
from .sim import (
    CHANNELS,
    PRESETS,
    ExperimentConfig,
    emit_csv,
    parse_config_values,
    parse_snr,
    preset,
    run_experiment,
    write_records,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# flag dest -> config field
_OVERRIDES = ("m", "k", "l", "scheme", "mu", "snr_db", "trials", "min_errors", "detector",
              "beamformer", "channel", "dt_ratio", "delta_deg", "seed", "rate_match")


def _slug(text):
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").lower() or "curve"


def _ber_parser(sub):
    p = sub.add_parser("ber", help="Monte Carlo BER/SER sweep")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", type=Path, help="key = value file; flags override it")
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--scheme")
    p.add_argument("--mu", type=int)
    p.add_argument("--snr", dest="snr_db", help="start:step:stop in dB, or a comma list")
    p.add_argument("--trials", type=int)
    p.add_argument("--min-errors", type=int)
    p.add_argument("--detector", choices=DETECTORS)
    p.add_argument("--beamformer", choices=METHODS)
    p.add_argument("--channel", choices=CHANNELS)
    p.add_argument("--dt-ratio", type=float)
    p.add_argument("--delta-deg", type=float)
    p.add_argument("--rate-match", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path; a preset writes one file per curve")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_ber)


def _cmd_ber(args, out):
    values = parse_config_values(args.config.read_text(encoding="utf-8")) if args.config else {}
    for name in _OVERRIDES:
        v = getattr(args, name)
        if v is not None:
            values[name] = parse_snr(v) if name == "snr_db" else v
    if args.preset:
        curves = [c.replace(**values) for c in preset(args.preset)]
    else:
        curves = [ExperimentConfig(**values)]
    target = args.out or values.get("out")
    for cfg in curves:
        records = run_experiment(cfg.replace(out=None), workers=args.workers)
        if target:
            path = Path(target)
            if len(curves) > 1:
                path = path.with_name(f"{path.stem}-{_slug(cfg.label)}{path.suffix or '.csv'}")
            emit_csv(records, path)
            print(f"wrote {path}", file=out)
        else:
            if cfg.label:
                print(f"# {cfg.label}", file=out)
            write_records(records, out)
    return EXIT_OK


def _design_parser(sub):
    p = sub.add_parser("design", help="transmission-matrix design for a channel covariance")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--sigma", type=Path, help="covariance matrix file (numpy text, complex allowed)")
    src.add_argument("--broadside", nargs=3, metavar=("M", "DT_RATIO", "DELTA_DEG"),
                     help="broadside array correlation")
    p.add_argument("--dmin", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True, help="noise variance per real dimension")
    p.add_argument("--method", choices=("exact", "waterfill"), default="exact")
    p.set_defaults(func=_cmd_design)


def _cmd_design(args, out):
    if args.sigma is not None:
        try:
            Sigma = np.atleast_2d(np.loadtxt(args.sigma, dtype=complex))
        except (OSError, ValueError) as err:
            raise ConfigError(f"sigma: cannot read {args.sigma}: {err}", field="sigma") from None
    else:
        try:
            M, ratio, deg = int(args.broadside[0]), float(args.broadside[1]), float(args.broadside[2])
        except ValueError:
            raise ConfigError("broadside: expected M DT_RATIO DELTA_DEG", field="broadside") from None
        Sigma = correlation_broadside(M, ratio, np.deg2rad(deg))
    try:
        d = design_beamformer(args.method, Sigma, args.dmin, args.sigma2)
    except ValueError as err:
        raise ConfigError(str(err), field="design") from None
    print(f"method = {d.method}", file=out)
    print(f"K = {d.K}", file=out)
    print("gamma_sq = " + ", ".join(format(x, ".17g") for x in d.gamma_sq), file=out)
    print(f"objective = {d.objective_value:.17g}", file=out)
    return EXIT_OK


def _constants_parser(sub):
    p = sub.add_parser("constants", help="sampled Gram-determinant constants of a code family")
    p.add_argument("--family", choices=("toeplitz",), default="toeplitz")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_constants)


def _cmd_constants(args, out):
    if args.l < 1 or args.k < 1:
        raise ConfigError("l and k must be positive", field="l" if args.l < 1 else "k")
    try:
        est = estimate_constants(ToeplitzFamily(args.l, args.k), args.samples, args.seed)
    except ValueError as err:
        raise ConfigError(str(err), field="samples") from None
    for name in ("c_min_hat", "c_max_hat", "c0_hat"):
        print(f"{name} = {getattr(est, name):.17g}", file=out)
    print(f"samples = {est.samples}", file=out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="toeplitz-stbc", description="Toeplitz space-time block code simulations and designs.")
    sub = parser.add_subparsers(dest="command", required=True)
    _ber_parser(sub)
    _design_parser(sub)
    _constants_parser(sub)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ConfigError, CapacityError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
