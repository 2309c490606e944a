"""Command-line interface: fit, simulate, diagnose, select, forecast.

Exit codes: 0 success, 1 usage or parse error, 2 constraint violation,
unidentified estimate or model/data mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .diagnostics import SelectionConfig, diagnostic_panels, fit_report, select_model
from .estimation import EstimationError, estimate
from .genetic import GaConfig
from .io import IngestError, data_hash, ingest_spread, load_model, read_series_csv, save_model
from .model import LikelihoodError, ModelError, ModelOrder
from .simulation import forecast, simulate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_MODEL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        if p.suffix.lower() == ".toml":
            return tomllib.loads(p.read_text())
        return json.loads(p.read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None


def _ga_config(args) -> GaConfig:
    values = _load_config(args.config)
    values = values.get("ga", values)
    if args.seed is not None:
        values["seed"] = args.seed
    try:
        return GaConfig.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad GA configuration: {exc}") from None


def _series(args):
    if getattr(args, "data_b", None):
        return ingest_spread(args.data, args.data_b, args.start, args.end)
    s = read_series_csv(args.data)
    if args.start or args.end:
        if s.months is None:
            raise UsageError("--start/--end need a dated series file")
        keep = [i for i, m in enumerate(s.months)
                if (not args.start or m >= args.start[:7]) and (not args.end or m <= args.end[:7])]
        s = type(s)(s.values[keep], [s.months[i] for i in keep], s.source)
    return s


def _check_length(n: int, p: int, what: str = "data") -> None:
    if n < p + 1:
        raise ModelError(f"{what} has {n} observations but the model needs more than p={p}")


def cmd_fit(args) -> int:
    try:
        order = ModelOrder(args.p, args.m1, args.m2)
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    ga = _ga_config(args)
    series = _series(args)
    _check_length(len(series), order.p)
    try:
        res = estimate(series.values, order, args.rounds, ga, args.mode, shared_ar=args.shared_ar)
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for r in exc.rounds:
            print(f"  round={r.index} loglik={r.loglik:.6f} identified={r.identified} "
                  f"boundary={r.boundary}", file=sys.stderr)
        return EXIT_MODEL
    model = res.model
    model.meta.update(seed=ga.seed, data_hash=data_hash(series.values))
    save_model(model, args.out)
    report = fit_report(model, series.values, args.mode, std_errors=res.std_errors, hessian_ok=res.hessian_ok)
    report_path = args.report or str(Path(args.out).with_suffix("")) + ".report.json"
    doc = report.to_dict()
    doc["rounds"] = [
        {"round": r.index, "loglik": r.loglik if np.isfinite(r.loglik) else None,
         "converged": r.converged, "identified": r.identified, "boundary": r.boundary}
        for r in res.rounds
    ]
    doc["hessian_message"] = res.hessian_message
    Path(report_path).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{model.order}: loglik={res.loglik:.6f} ({args.mode}) -> {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    init = "stationary"
    if args.init != "stationary":
        if not args.init.startswith("last:"):
            raise UsageError("--init must be 'stationary' or 'last:<data.csv>'")
        hist = read_series_csv(args.init[5:]).values
        _check_length(hist.size + 1, model.p, "initial-value data")
        init = hist[-model.p:]
    sim = simulate(model, args.length, n_paths=args.paths, init=init, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t", "value", "regime"])
        for j in range(args.paths):
            for t in range(args.length):
                w.writerow([j + 1, t + 1, repr(float(sim.paths[t, j])), int(sim.regimes[t, j]) + 1])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = load_model(args.model)
    series = _series(args)
    _check_length(len(series), model.p)
    rows = diagnostic_panels(model, series.values, args.lags)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["panel", "x", "y", "band_lo", "band_hi"])
        w.writerows(("" if isinstance(v, float) and np.isnan(v) else v for v in row) for row in rows)
    if args.report:
        rep = fit_report(model, series.values, args.mode, max_lag=args.lags)
        Path(args.report).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_select(args) -> int:
    ga = _ga_config(args)
    series = _series(args)
    cfg = SelectionConfig(n_rounds=args.rounds, ga=ga, mode=args.mode, criterion=args.criterion,
                          dof_threshold=args.dof_threshold)
    trace = select_model(series.values, range(args.pmin, args.pmax + 1), range(args.mmin, args.mmax + 1), cfg)
    Path(args.out).write_text(json.dumps(trace.summary(), indent=2) + "\n")
    rec = trace.recommended
    print(f"recommended: {rec.order if rec else 'none'}")
    return EXIT_OK if rec else EXIT_MODEL


def cmd_forecast(args) -> int:
    model = load_model(args.model)
    series = _series(args)
    _check_length(len(series) + 1, model.p)
    levels = [float(q) for q in args.quantiles.split(",")]
    fc = forecast(model, series.values, args.horizon, n_paths=args.paths, quantiles=levels, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["horizon", "mean"] + [f"q{q:g}" for q in fc.quantile_levels])
        for h in range(args.horizon):
            w.writerow([h + 1, repr(float(fc.mean[h]))] + [repr(float(v)) for v in fc.quantiles[h]])
    return EXIT_OK


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV: date,value / date,a,b / a 'value' column")
    p.add_argument("--data-b", help="second date,value CSV; the series becomes data - data-b")
    p.add_argument("--start", help="first month (YYYY-MM)")
    p.add_argument("--end", help="last month (YYYY-MM)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gstmar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="estimate a model")
    _add_data(f)
    f.add_argument("--p", type=int, required=True, help="autoregressive order")
    f.add_argument("--m1", type=int, required=True, help="number of Gaussian regimes")
    f.add_argument("--m2", type=int, required=True, help="number of Student-t regimes")
    f.add_argument("--mode", choices=["exact", "conditional"], default="exact")
    f.add_argument("--rounds", type=int, default=20, help="independent GA + BFGS rounds")
    f.add_argument("--seed", type=int)
    f.add_argument("--shared-ar", action="store_true", help="one AR polynomial for all regimes")
    f.add_argument("--config", help="JSON or TOML file with GA settings")
    f.add_argument("--out", required=True)
    f.add_argument("--report", help="fit report path (default: <out>.report.json)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="simulate sample paths")
    s.add_argument("--model", required=True)
    s.add_argument("--length", type=int, required=True)
    s.add_argument("--paths", type=int, default=1, help="number of independent paths")
    s.add_argument("--seed", type=int)
    s.add_argument("--init", default="stationary",
                   help="'stationary' or 'last:<data.csv>' to start from the last p values")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", help="quantile-residual diagnostics")
    d.add_argument("--model", required=True)
    _add_data(d)
    d.add_argument("--lags", type=int, default=12, help="ACF lags")
    d.add_argument("--mode", choices=["exact", "conditional"], default="exact")
    d.add_argument("--out", required=True)
    d.add_argument("--report")
    d.set_defaults(func=cmd_diagnose)

    e = sub.add_parser("select", help="StMAR grid search followed by G-StMAR conversion")
    _add_data(e)
    e.add_argument("--pmin", type=int, default=1)
    e.add_argument("--pmax", type=int, required=True)
    e.add_argument("--mmin", type=int, default=1)
    e.add_argument("--mmax", type=int, required=True)
    e.add_argument("--rounds", type=int, default=20)
    e.add_argument("--seed", type=int)
    e.add_argument("--mode", choices=["exact", "conditional"], default="exact")
    e.add_argument("--criterion", choices=["aic", "hqic", "bic"], default="bic", help="ranking criterion")
    e.add_argument("--dof-threshold", type=float, default=100.0,
                   help="t regimes with larger dof are refitted as Gaussian")
    e.add_argument("--config", help="JSON or TOML file with GA settings")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_select)

    c = sub.add_parser("forecast", help="Monte Carlo forecasts")
    c.add_argument("--model", required=True)
    _add_data(c)
    c.add_argument("--horizon", type=int, required=True)
    c.add_argument("--paths", type=int, default=5000)
    c.add_argument("--seed", type=int)
    c.add_argument("--quantiles", default="0.025,0.16,0.5,0.84,0.975", help="comma-separated levels")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_forecast)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IngestError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, LikelihoodError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
