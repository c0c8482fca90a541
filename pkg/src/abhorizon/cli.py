"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 fit did not converge (the best parameters found are still written).
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
import warnings
from pathlib import Path

from . import io
from .bench import ALL_METHODS, run_benchmark
from .data import SuffStats, compute_spectrum, compute_suffstats
from .errors import ConfigError, DataError, UnfitError
from .fit import FitConfig, fit_mle, fit_regression
from .model import HyperParams, forecast
from .simulate import sample_model, sample_zipf

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNCONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _out(path: str):
    return sys.stdout if path == "-" else path


def _load(path: str, fmt: str):
    if not Path(path).is_file():
        raise DataError(f"--input: no such file {path!r}")
    if fmt == "long":
        return io.parse_long_csv(path)
    return io.parse_aggregate_csv(path)


def _pilot_stats(args) -> SuffStats:
    src = _load(args.input, args.format)
    days = src.days if args.format == "long" else len(src)
    if not 1 <= args.pilot_days <= days:
        raise UsageError(f"--pilot-days must be in 1..{days} for {args.input}, got {args.pilot_days}")
    if args.format == "long":
        return compute_suffstats(src, args.pilot_days)
    return SuffStats.from_arrivals(src[: args.pilot_days])


def _fit_config(args) -> FitConfig:
    body = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                body = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: cannot read {args.config!r}: {exc}") from None
        if not isinstance(body, dict):
            raise UsageError("--config: expected a JSON object")
    if getattr(args, "method", None):
        body["method"] = args.method
    if getattr(args, "seed", None) is not None:
        body["seed"] = args.seed
    try:
        return FitConfig.from_dict(body)
    except (ConfigError, TypeError, ValueError) as exc:
        raise UsageError(f"--config: {exc}") from None


def cmd_simulate(args) -> int:
    if args.days < 0:
        raise UsageError("--days must be >= 0")
    if args.model == "model":
        try:
            params = HyperParams(args.beta, args.sigma, args.c, args.r)
        except ValueError as exc:
            raise UsageError(f"--beta/--sigma/--c/--r: {exc}") from None
        data = sample_model(params, args.days, args.seed)
    else:
        if args.tau <= 0:
            raise UsageError("--tau must be positive")
        if args.n_users < 1:
            raise UsageError("--n-users must be >= 1")
        data = sample_zipf(args.tau, args.n_users, args.days, args.seed)
    io.write_long_csv(data, _out(args.out))
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _fit_config(args)
    stats = _pilot_stats(args)
    if config.method == "mle" and not stats.has_counts:
        raise UsageError("--method mle needs per-user counts; use --format long or --method regression")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if config.method == "mle":
            result = fit_mle(stats, config)
        else:
            result = fit_regression(stats.arrivals, config)
    io.write_params(result, _out(args.out), pilot_days=stats.D0)
    if not result.converged:
        print(f"warning: fit did not converge after {result.iterations} generations", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.horizon < 0:
        raise UsageError("--horizon must be >= 0")
    if args.freq_max < 0:
        raise UsageError("--freq-max must be >= 0")
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    if args.n_mc < 1:
        raise UsageError("--n-mc must be >= 1")
    if not Path(args.params).is_file():
        raise DataError(f"--params: no such file {args.params!r}")
    params = io.read_params(args.params)
    stats = _pilot_stats(args)
    report = forecast(
        params, stats, args.horizon, freq_max=args.freq_max, level=args.level, n_mc=args.n_mc, seed=args.seed
    )
    io.write_forecast(report, _out(args.out))
    return EXIT_OK


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated integers, got {text!r}") from None


def cmd_evaluate(args) -> int:
    paths = sorted(glob.glob(args.inputs))
    if not paths:
        raise DataError(f"--inputs: pattern {args.inputs!r} matched no files")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad:
        raise UsageError(f"--methods: unknown {bad}; choose from {','.join(ALL_METHODS)}")
    horizons = _int_list(args.horizon, "--horizon")
    if not horizons or min(horizons) < 0:
        raise UsageError("--horizon: need one or more nonnegative integers")
    if args.pilot_days < 1:
        raise UsageError("--pilot-days must be >= 1")
    config = _fit_config(args)
    names = [Path(p).name for p in paths]
    if len(set(names)) != len(names):
        names = paths
    datasets = [(n, io.parse_long_csv(p)) for n, p in zip(names, paths)]
    reports = run_benchmark(
        datasets, args.pilot_days, horizons, methods, seed=args.seed, fit_config=config, threads=args.threads
    )
    io.write_results_csv(reports, _out(args.out), include_runtime=args.runtime)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    data = _load(args.input, "long")
    if not 1 <= args.pilot_days <= data.days:
        raise UsageError(f"--pilot-days must be in 1..{data.days}, got {args.pilot_days}")
    io.write_spectrum_csv(compute_spectrum(data, args.pilot_days), _out(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abhorizon", description="Forecast A/B-test user arrivals and activity.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="draw synthetic trigger data")
    simsub = sim.add_subparsers(dest="model", required=True, parser_class=_Parser)
    m = simsub.add_parser("model", help="exact draw from the model")
    m.add_argument("--beta", type=float, required=True)
    m.add_argument("--sigma", type=float, required=True)
    m.add_argument("--c", type=float, required=True)
    m.add_argument("--r", type=float, required=True)
    z = simsub.add_parser("zipf", help="Zipf-Poisson draw")
    z.add_argument("--tau", type=float, required=True)
    z.add_argument("--n-users", type=int, required=True)
    for q in (m, z):
        q.add_argument("--days", type=int, required=True)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", default="-", help="output long CSV ('-' for stdout)")
        q.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate hyperparameters from a pilot")
    f.add_argument("--input", required=True)
    f.add_argument("--format", choices=("long", "aggregate"), default="long")
    f.add_argument("--method", choices=("mle", "regression"), default=None)
    f.add_argument("--pilot-days", type=int, required=True)
    f.add_argument("--config", help="JSON fit configuration")
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", default="-")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="forecast a horizon from fitted parameters")
    pr.add_argument("--input", required=True)
    pr.add_argument("--format", choices=("long", "aggregate"), default="long")
    pr.add_argument("--params", required=True)
    pr.add_argument("--pilot-days", type=int, required=True)
    pr.add_argument("--horizon", type=int, required=True)
    pr.add_argument("--freq-max", type=int, default=5)
    pr.add_argument("--level", type=float, default=0.95)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--n-mc", type=int, default=10_000)
    pr.add_argument("--out", default="-")
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="benchmark methods on a set of long CSVs")
    ev.add_argument("--inputs", required=True, help="glob of long CSV files")
    ev.add_argument("--pilot-days", type=int, required=True)
    ev.add_argument("--horizon", required=True, help="one or more comma-separated horizons")
    ev.add_argument("--methods", default=",".join(ALL_METHODS))
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--config", help="JSON fit configuration for the nbp methods")
    ev.add_argument("--threads", type=int, default=None, help="default: AB_HORIZON_THREADS")
    ev.add_argument("--runtime", action="store_true", help="add a runtime_ms column")
    ev.add_argument("--out", default="-")
    ev.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("spectrum", help="presence frequency spectrum of a pilot")
    sp.add_argument("--input", required=True)
    sp.add_argument("--pilot-days", type=int, required=True)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, UnfitError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
