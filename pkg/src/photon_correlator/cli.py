"""Command-line entry point.

Exit codes: 0 success, 2 configuration/usage error, 3 input format error,
4 analysis failure (fit non-convergence or data the requested analysis
cannot use).
"""

import argparse
import sys

from .analysis import fit_de, fit_lifetime, g2_zero, measure_irf, read_de_sweep
from .config import load_config
from .correlator import read_histogram_csv
from .errors import AnalysisError, ConfigError, FormatError
from .pipelines import (
    format_record,
    run_de_sweep,
    run_hbt,
    run_tcspc,
    write_de_sweep_artifacts,
    write_hbt_artifacts,
    write_tcspc_artifacts,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_FIT = 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="photon-correlator",
        description="Simulate and analyze pulsed single-photon counting experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_sim(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run config file (INI key=value)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        return p

    add_sim("simulate-hbt",
            "beamsplitter + two detectors; writes timetags, histogram, g2 record")
    add_sim("simulate-tcspc",
            "reverse start-stop lifetime run; writes histogram and fit record")
    p = add_sim("simulate-de-sweep",
                "attenuation sweep of the calibration laser; writes sweep CSV and fit")
    p.add_argument("--mu", default=None,
                   help="comma-separated mean photon numbers, overriding the config")

    pa = sub.add_parser("analyze", help="offline analysis of recorded files")
    asub = pa.add_subparsers(dest="analysis", required=True)

    g2p = asub.add_parser("g2", help="zero-delay correlation from a histogram CSV")
    g2p.add_argument("--hist", required=True)
    g2p.add_argument("--rep-period-ps", type=float, required=True)
    g2p.add_argument("--side-peaks", type=int, default=20)
    g2p.add_argument("--halfwidth-ps", type=float, default=None,
                     help="integration half-width (default: period/2 minus one bin)")

    lp = asub.add_parser("lifetime", help="decay fit of a histogram CSV")
    lp.add_argument("--hist", required=True)
    lp.add_argument("--fix-sigma-ps", type=float, default=None)
    lp.add_argument("--weighted", action="store_true")

    dp = asub.add_parser("de", help="efficiency/dark fit of a sweep CSV")
    dp.add_argument("--sweep", required=True)
    dp.add_argument("--f-hz", type=float, required=True)
    dp.add_argument("--weighted", action="store_true")

    ip = asub.add_parser("irf", help="Gaussian IRF fit of a histogram CSV")
    ip.add_argument("--hist", required=True)

    return parser


def _load_run_config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be in [0, 2^64), got {args.seed}")
        cfg = cfg.with_seed(args.seed)
    return cfg


def _print_record(record):
    sys.stdout.write(format_record(record))


def _cmd_simulate_hbt(args):
    cfg = _load_run_config(args)
    result = run_hbt(cfg)
    paths = write_hbt_artifacts(result, args.out)
    _print_record(result.estimate.record())
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def _cmd_simulate_tcspc(args):
    cfg = _load_run_config(args)
    result = run_tcspc(cfg)
    paths = write_tcspc_artifacts(result, args.out)
    if result.irf is not None:
        _print_record({"irf_fwhm_ps": result.irf[0], "irf_center_ps": result.irf[1]})
    else:
        _print_record(result.fit.record())
    print(f"wrote {len(paths)} files to {args.out}")
    if result.fit is not None and not result.fit.converged:
        return EXIT_FIT
    return EXIT_OK


def _cmd_simulate_de_sweep(args):
    cfg = _load_run_config(args)
    mu_values = None
    if args.mu is not None:
        try:
            mu_values = tuple(float(x) for x in args.mu.replace(" ", "").split(",") if x)
        except ValueError:
            raise ConfigError(f"--mu: expected comma-separated numbers, got {args.mu!r}")
        if not mu_values:
            raise ConfigError("--mu: empty list")
    result = run_de_sweep(cfg, mu_values)
    paths = write_de_sweep_artifacts(result, args.out)
    _print_record(result.fit.record())
    print(f"wrote {len(paths)} files to {args.out}")
    if not result.fit.converged:
        return EXIT_FIT
    return EXIT_OK


def _cmd_analyze(args):
    if args.analysis == "g2":
        hist = read_histogram_csv(args.hist)
        estimate = g2_zero(hist, args.rep_period_ps,
                           integration_halfwidth_ps=args.halfwidth_ps,
                           n_side_peaks=args.side_peaks)
        _print_record(estimate.record())
        return EXIT_OK
    if args.analysis == "lifetime":
        hist = read_histogram_csv(args.hist)
        fit = fit_lifetime(hist, fix_sigma=args.fix_sigma_ps, weighted=args.weighted)
        _print_record(fit.record())
        return EXIT_OK if fit.converged else EXIT_FIT
    if args.analysis == "de":
        points = read_de_sweep(args.sweep)
        fit = fit_de(points, args.f_hz, weighted=args.weighted)
        _print_record(fit.record())
        return EXIT_OK if fit.converged else EXIT_FIT
    if args.analysis == "irf":
        hist = read_histogram_csv(args.hist)
        fwhm, center = measure_irf(hist)
        _print_record({"irf_fwhm_ps": fwhm, "irf_center_ps": center})
        return EXIT_OK
    raise ConfigError(f"unknown analysis {args.analysis!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate-hbt": _cmd_simulate_hbt,
        "simulate-tcspc": _cmd_simulate_tcspc,
        "simulate-de-sweep": _cmd_simulate_de_sweep,
        "analyze": _cmd_analyze,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
