"""Command-line front end.

Every command writes a bundle directory (``--out``) holding its tables, the
fitted models as JSON, and ``manifest.json``.  Reruns with the same
configuration, seed and input bytes produce byte-identical bundles.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
non-convergence (outputs are still written).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import emissions as em
from . import hmm, ppstats, predict, report, robustness, sehm, simulate
from .series import EventSeries, SeriesError, interarrivals, load_series, merge_missing, read_csv
from .series import write_csv as write_series_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGENCE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


# helpers --------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return vals


def _flatten(lists) -> list[int]:
    out = []
    for v in lists:
        out.extend(v)
    return out


def _config(args) -> dict:
    """Run configuration echoed into the manifest; paths reduce to file names."""
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "out"):
            continue
        if k in ("input", "extra") and v:
            v = Path(v).name
        cfg[k] = v
    return cfg


def _load(args) -> EventSeries:
    if not args.input:
        raise ConfigError("--input is required")
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    try:
        return load_series(path)
    except (SeriesError, ValueError, KeyError) as exc:
        raise DataError(str(exc)) from exc


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, out: Path, converged: bool = True) -> int:
    report.write_manifest(out, _config(args), [getattr(args, "input", None), getattr(args, "extra", None)])
    if not converged:
        print("warning: numerical non-convergence; outputs written", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _state_rows(cl: hmm.Classification, series: EventSeries) -> list[dict]:
    post = cl.path.posteriors
    top = cl.model.d - 1
    if cl.model.obs_kind == "dt":
        ia = interarrivals(series) if series.active_days else None
        return [{"index": k + 1, "day": int(ia.t_list[k]), "duration": int(ia.durations[k]),
                 "state": int(s), "p_active": float(post[k, top])}
                for k, s in enumerate(cl.path.states)]
    from .series import windowize
    w = windowize(series, cl.model.delta)
    return [{"window": n + 1, "start_day": n * cl.model.delta + 1, "X": int(w.x[n]), "Y": int(w.y[n]),
             "length": int(w.lengths[n]), "state": int(s), "p_active": float(post[n, top])}
            for n, s in enumerate(cl.path.states)]


def _summary_row(cl: hmm.Classification) -> dict:
    s = cl.summary
    row = {"delta": s["delta"], "family": s["family"], "obs": s["obs_kind"]}
    for j, params in enumerate(s["params"]):
        for name, v in params.items():
            row[f"{name}{j}"] = v
    for i in range(len(s["transition"])):
        for j in range(len(s["transition"])):
            row[f"P{i}{j}"] = s["transition"][i][j]
    row.update({"N": s["n_windows"], "N_spurt": s["n_spurt"], "f": s["f"],
                "log_likelihood": s["log_likelihood"], "iterations": s["iterations"],
                "converged": s["converged"], "warnings": "; ".join(s["warnings"])})
    return row


def _classify_one(args, series, delta):
    return hmm.classify(series, delta, args.family, args.obs, args.states, args.tol, args.max_iter,
                        n_starts=args.starts, seed=args.seed)


# commands -------------------------------------------------------------------

def cmd_classify(args) -> int:
    series = _load(args)
    out = _out(args)
    rows, ok = [], True
    for delta in args.delta:
        cl = _classify_one(args, series, delta)
        tag = f"d{cl.summary['delta']}"
        report.write_json(out / f"model_{tag}.json", cl.model)
        report.write_table(out / f"states_{tag}", _state_rows(cl, series), fmt=args.format)
        rows.append(_summary_row(cl))
        ok &= bool(cl.summary["converged"])
        for w in cl.summary["warnings"]:
            print(f"warning (delta={delta}): {w}", file=sys.stderr)
    report.write_table(out / "summary", rows, fmt=args.format)
    return _finish(args, out, ok)


def cmd_diagnose(args) -> int:
    series = _load(args)
    if series.active_days < 3:
        raise DataError("diagnostics need at least three activity days")
    out = _out(args)
    delta = args.delta[0]
    cl = _classify_one(args, series, delta)
    report.write_json(out / "model.json", cl.model)
    report.write_table(out / "states", _state_rows(cl, series), fmt=args.format)
    days = cl.days
    h_grid = ppstats.default_h_grid(args.h_max)
    ia = interarrivals(series)

    # whole series: naive and reweighted, edge-corrected curves
    naive = ppstats.ripley_naive(ia, series.n_days, h_grid)
    p_hat = ppstats.state_rates(series, days)
    full = ppstats.bootstrap_band(lambda t, span: ppstats.ripley_corrected(
        t, span, h_grid, p_hat if t is ia.t_list else float(p_hat.mean())),
        ia, series.n_days, args.resamples, 1 - args.alpha, args.seed)
    rows = [dict(r, k_naive=float(naive.k_hat[i])) for i, r in enumerate(full.rows())]
    report.write_table(out / "ripley_full", rows, fmt=args.format)

    labels = {0: "inactive", cl.model.d - 1: "active"}
    by_state, ks_all = {}, {}
    for state in range(cl.model.d):
        name = labels.get(state, f"state{state}")
        by_state[name] = series.counts[days == state]
        if not (days == state).any():
            continue
        sub = ppstats.subseries(series, days, state, args.seed)
        if sub.series.active_days >= 3:
            sia = interarrivals(sub.series)
            p = sub.series.active_days / sub.n_act
            curve = ppstats.bootstrap_band(lambda t, span: ppstats.ripley_corrected(t, span, h_grid, p),
                                           sia, sub.n_act, args.resamples, 1 - args.alpha, args.seed)
            report.write_table(out / f"ripley_{name}", curve.rows(), fmt=args.format)
            gaps = sia.durations[1:]
            cap = args.ks_cap[state] if args.ks_cap and state < len(args.ks_cap) else None
            try:
                ks = ppstats.ks_exponential(gaps, args.alpha, cap)
                ks_all[name] = dict(ks.to_dict(), reject=ks.reject, cap=cap)
            except ppstats.DiagnosticError as exc:
                ks_all[name] = {"error": str(exc)}
            qq = ppstats.qq_data(gaps, "exponential")
            report.write_table(out / f"qq_dt_{name}", [{"theoretical": a, "sample": b} for a, b in qq],
                               fmt=args.format)
        xs = ppstats.window_activity_counts(series, delta)
        st = cl.path.states[: xs.size]
        if (st == state).any():
            qq = ppstats.qq_data(xs[st == state], "poisson")
            report.write_table(out / f"qq_x_{name}", [{"theoretical": a, "sample": b} for a, b in qq],
                               fmt=args.format)
    report.write_json(out / "ks.json", ks_all)

    table = em.aic_table({k: v for k, v in by_state.items() if v.size}, em.FAMILIES)
    aic_rows = []
    for name, fits in table.items():
        for f in fits:
            row = {"state": name, "family": f.model.family}
            for lab, obs_, exp_ in zip(f.histogram["labels"], f.histogram["observed"], f.histogram["rounded"]):
                row[f"obs_{lab}"] = obs_
                row[f"exp_{lab}"] = exp_
            row.update({"aic": f.aic, "log_likelihood": f.log_likelihood, "n_params": f.n_params,
                        "params": " ".join(repr(float(p)) for p in f.model.params), "boundary": f.boundary})
            aic_rows.append(row)
    report.write_table(out / "aic", aic_rows, fmt=args.format)
    return _finish(args, out, bool(cl.summary["converged"]))


def cmd_compare(args) -> int:
    series = _load(args)
    m = len(interarrivals(series))
    horizons = _flatten(args.horizons)
    if max(horizons) >= m:
        raise DataError(f"training horizon {max(horizons)} leaves no gap to predict (m = {m})")
    out = _out(args)
    runs = predict.rolling_eval(series, args.estimators, horizons, tol=args.tol, max_iter=args.max_iter,
                                n_starts=args.starts, seed=args.seed)
    report.write_table(out / "comparison", predict.comparison_table(runs), fmt=args.format)
    trace = [{"estimator": r.estimator, "n": r.n, "k": r.n + i + 1, "actual": float(a), "prediction": float(p)}
             for r in runs for i, (a, p) in enumerate(zip(r.actuals, r.predictions))]
    report.write_table(out / "trace", trace, fmt=args.format)
    report.write_json(out / "models.json", [{"estimator": r.estimator, "n": r.n, "model": r.model,
                                             "log_likelihood": r.log_likelihood, "aic": r.aic} for r in runs])
    return _finish(args, out)


def _params(args) -> dict:
    if not args.params:
        return {}
    text = args.params
    if Path(text).exists():
        text = Path(text).read_text()
    try:
        p = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from exc
    if not isinstance(p, dict):
        raise ConfigError("--params must be a JSON object")
    return p


def cmd_simulate(args) -> int:
    p = _params(args)
    rng = np.random.default_rng(args.seed)
    out = _out(args)
    try:
        if args.generator == "hmm":
            model = simulate.two_state_model(delta=args.delta[0], family=args.family, obs_kind=args.obs, **p)
            series, states = simulate.simulate_hmm(model, args.days, rng)
            report.write_table(out / "states", [{"window": n + 1, "state": int(s)} for n, s in enumerate(states)],
                               fmt=args.format)
        else:
            model = sehm.SehmModel(**{"b": 0.1, "alpha": 0.5, "omega": 0.2, "s": 2.5, **p})
            series = simulate.simulate_sehm(model, args.days, rng)
    except TypeError as exc:
        raise ConfigError(f"bad generator parameters: {exc}") from exc
    except (hmm.HmmError, sehm.SehmError, em.EmissionError) as exc:
        raise ConfigError(str(exc)) from exc
    write_series_csv(series, out / "series.csv")
    report.write_json(out / "generator.json", {"generator": args.generator, "model": model, "seed": args.seed,
                                               "days": args.days})
    return _finish(args, out)


def _extra(args):
    if not args.extra:
        raise ConfigError("--extra is required")
    if not Path(args.extra).exists():
        raise DataError(f"{args.extra}: no such file")
    try:
        return read_csv(args.extra)
    except (SeriesError, ValueError) as exc:
        raise DataError(str(exc)) from exc


def cmd_robustness(args) -> int:
    series = _load(args)
    extra = _extra(args)
    out = _out(args)
    try:
        curve = robustness.robustness_sweep(series, extra, args.steps, args.delta[0], args.family, args.obs,
                                            args.tol, args.max_iter)
    except (SeriesError, robustness.RobustnessError) as exc:
        raise DataError(str(exc)) from exc
    report.write_table(out / "robustness", curve.rows(), fmt=args.format)
    return _finish(args, out)


def cmd_merge(args) -> int:
    series = _load(args)
    extra = _extra(args)
    out = _out(args)
    try:
        merged = merge_missing(series, extra, args.steps)
    except SeriesError as exc:
        raise DataError(str(exc)) from exc
    rows = []
    for j, s in enumerate(merged, start=1):
        write_series_csv(s, out / f"merged_step{j}.csv")
        rows.append({"step": j, "total": s.total, "active_days": s.active_days,
                     "frac_missing": robustness.frac_missing(series, s) if series.total else None})
    report.write_table(out / "steps", rows, fmt=args.format)
    return _finish(args, out)


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="event CSV (date,count or one row per incident) or series JSON")
    common.add_argument("--delta", type=_int_list, nargs="+", default=[[15]],
                        help="window length(s) in days, e.g. --delta 10 15 or --delta 10,15")
    common.add_argument("--family", default="geom", choices=em.FAMILIES)
    common.add_argument("--obs", default="xy", choices=hmm.OBS_KINDS)
    common.add_argument("--states", type=int, default=2, help="number of hidden states d")
    common.add_argument("--starts", type=int, default=1, help="Baum-Welch starts (1 = default init only)")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--max-iter", type=int, default=500)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--alpha", type=float, default=0.05, help="significance level; bands use 1 - alpha")
    common.add_argument("--h-max", type=float, default=50.0)
    common.add_argument("--resamples", type=int, default=1000)
    common.add_argument("--out", default="out")
    common.add_argument("--format", default="csv", choices=("csv", "json"))

    p = argparse.ArgumentParser(prog="activity-hmm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify", parents=[common], help="fit and decode the HMM for each delta")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("diagnose", parents=[common], help="Ripley's K, KS tests, Q-Q and AIC tables")
    s.add_argument("--ks-cap", type=float, nargs="+", default=None,
                   help="per-state cap on durations entering the KS test (state order)")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("compare", parents=[common], help="HMM vs SEHM vs baseline gap prediction")
    s.add_argument("--horizons", type=_int_list, nargs="+", default=[[100]])
    s.add_argument("--estimators", nargs="+", default=list(predict.ESTIMATORS), choices=predict.ESTIMATORS)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("simulate", parents=[common], help="synthetic series from an HMM or SEHM")
    s.add_argument("--generator", default="hmm", choices=("hmm", "sehm"))
    s.add_argument("--days", type=int, default=3000)
    s.add_argument("--params", help="generator parameters as a JSON object or a JSON file path")
    s.set_defaults(func=cmd_simulate)

    for name, fn, hlp in (("robustness", cmd_robustness, "reclassify as missing events are added"),
                          ("merge", cmd_merge, "cumulatively merge missing events into the series")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--extra", help="CSV of additional events")
        s.add_argument("--steps", type=int, default=None)
        s.set_defaults(func=fn)
    return p


def _validate(args):
    args.delta = _flatten(args.delta)
    if args.states < 1:
        raise ConfigError("--states must be >= 1")
    if not 0 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0, 1)")
    if args.tol <= 0 or args.max_iter < 1:
        raise ConfigError("--tol must be positive and --max-iter at least 1")
    if args.h_max <= 0 or args.resamples < 0 or args.starts < 1:
        raise ConfigError("--h-max must be positive, --resamples non-negative, --starts positive")
    if getattr(args, "days", 1) < 1 or (getattr(args, "steps", None) or 1) < 1:
        raise ConfigError("--days and --steps must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SeriesError, ppstats.DiagnosticError, predict.PredictionError,
            sehm.SehmError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except hmm.HmmError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
