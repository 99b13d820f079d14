"""Batch command-line front end: ``python -m ladynet <command> ...``.

Every command takes ``--seed`` (required, directly or through ``--config``)
and ``--out``; options may also come from a JSON file given with
``--config`` whose keys are the option names (dashes or underscores).
Explicit flags win over the file. Each output directory gets a
``manifest.json`` with the resolved configuration, content hashes of the
inputs and library versions.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys

import numpy as np

from . import __version__
from .forecast_online import (DEFAULT_LOOKBACK, OnlineState, forecast_one_step,
                              forecast_protocol, online_update, predict_replicate,
                              write_forecast_csv, write_predict_csv)
from .gibbs import ModelConfig, in_sample_auc, load_store, run_gibbs, save_store, select_H
from .netseries import DataError, load_series
from .netstats import is_undefined, predictive_check, write_check_csv
from .simgen import (DEFAULT_LEVELS, Schedule, default_regimes, default_schedule,
                     simulate, write_simulation)
from .statespace import NumericalError

log = logging.getLogger("ladynet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _git_hash(path) -> str:
    """Git blob hash of a file (sha1 over ``"blob <size>\\0" + content``)."""
    with open(path, "rb") as fh:
        data = fh.read()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _input_hashes(paths) -> dict:
    out = {}
    for p in paths:
        if p is None:
            continue
        if os.path.isdir(p):
            for name in sorted(os.listdir(p)):
                full = os.path.join(p, name)
                if os.path.isfile(full):
                    out[full] = _git_hash(full)
        elif os.path.isfile(p):
            out[p] = _git_hash(p)
    return out


def _versions() -> dict:
    import numba
    import scipy

    return {"ladynet": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _write_manifest(args, inputs):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {"command": args.command, "config": cfg,
                "inputs": _input_hashes(inputs), "versions": _versions()}
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _model_config(args, H) -> ModelConfig:
    hyper = {}
    for name in ("a_mu", "b_mu", "a_z", "b_z", "a_x", "b_x", "a_m", "b_m"):
        value = getattr(args, name, None)
        if value is not None:
            hyper[name] = value
    try:
        return ModelConfig(H=H, n_iter=args.iters, burn_in=args.burn,
                           thin=args.thin, seed=args.seed, **hyper)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_series_arg(path, stem):
    if not os.path.exists(os.path.join(path, f"{stem}.json")):
        raise DataError(f"no series '{stem}' in {path}")
    return load_series(path, stem)


def _rng(args):
    return np.random.default_rng(args.seed)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    if args.levels is not None and len(args.levels) != 3:
        raise ConfigError("--levels takes three values: high medium low")
    levels = tuple(args.levels) if args.levels else DEFAULT_LEVELS
    try:
        regimes = default_regimes(*levels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.schedule:
        with open(args.schedule) as fh:
            sched = Schedule.from_json(json.load(fh))
        _, grid = default_schedule(sched.n, args.t_end)
    else:
        sched, grid = default_schedule(args.n, args.t_end)
    rng = _rng(args)
    series, pi = simulate(sched, regimes, rng, grid)
    write_simulation(args.out, series, pi, sched, levels)
    for r in range(1, args.replicates):
        rep, _ = simulate(sched, regimes, rng, grid)
        from .netseries import save_series
        save_series(rep, args.out, f"replicate{r}")
    _write_manifest(args, [args.schedule])


def cmd_fit(args):
    series = _load_series_arg(args.data, args.stem)
    rng = _rng(args)
    if str(args.H).lower() == "auto":
        cfg = _model_config(args, 0)
        H_star, aucs, fits = select_H(series, cfg, args.threshold,
                                      max_H=args.max_H, return_fits=True)
        store = fits[H_star]
        with open(os.path.join(args.out, "h_selection.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["H", "auc", "selected"])
            for H, a in aucs.items():
                w.writerow([H, repr(a), int(H == H_star)])
    else:
        try:
            H = int(args.H)
        except ValueError:
            raise ConfigError(f"--H must be an integer or 'auto', got {args.H!r}")
        store = run_gibbs(_model_config(args, H), series, rng)
    save_store(store, args.out, pi_thin=args.pi_thin, write_pi=not args.no_pi)
    OnlineState.from_store(store, series).save(args.out)
    value = in_sample_auc(store, series)
    with open(os.path.join(args.out, "fit_summary.json"), "w") as fh:
        json.dump({"H": store.H, "n_draws": store.n_draws,
                   "in_sample_auc": None if is_undefined(value) else value}, fh,
                  indent=1)
    _write_manifest(args, [args.data])


def cmd_forecast(args):
    store = load_store(args.fit)
    delta = args.delta
    if delta is None:
        if store.n < 2:
            raise ConfigError("--delta is required when the fit has one time")
        delta = float(store.times[-1] - store.times[-2])
    write_forecast_csv(forecast_one_step(store, delta),
                       os.path.join(args.out, "forecast.csv"))
    _write_manifest(args, [args.fit])


def cmd_update(args):
    online = OnlineState.load(args.fit)
    new = _load_series_arg(args.data, args.stem)
    cfg = _model_config(args, online.H)
    upd = online_update(online, new, args.j, cfg, _rng(args))
    upd.state.save(args.out)
    if upd.store is not None:
        save_store(upd.store, args.out, pi_thin=args.pi_thin, write_pi=not args.no_pi)
        offset = online.n
        rows, cols = upd.store.rows, upd.store.cols
        with open(os.path.join(args.out, "update_pi.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_index", "v", "u", "mean"])
            for k, pm in enumerate(upd.pi_mean):
                for d in range(rows.size):
                    w.writerow([offset + k, int(rows[d]), int(cols[d]), repr(float(pm[d]))])
    _write_manifest(args, [args.fit, args.data])


def cmd_predict(args):
    store = load_store(args.fit)
    test = _load_series_arg(args.data, args.stem)
    res = predict_replicate(store, test)
    write_predict_csv(res.aucs, os.path.join(args.out, "predict_auc.csv"))
    _write_manifest(args, [args.fit, args.data])


def cmd_check(args):
    store = load_store(args.fit)
    series = _load_series_arg(args.data, args.stem)
    if series.n != store.n or series.V != store.V:
        raise DataError("series does not match the fitted model")
    names = args.labels if args.labels is not None else list(series.labels)
    missing = [n for n in names if n not in series.labels]
    if missing:
        raise ConfigError(f"unknown labels: {missing}")
    labels = {n: series.labels[n] for n in names}
    rows = predictive_check(lambda t: store.pi_draws([t])[:, 0], series.adjacency,
                            labels, _rng(args))
    write_check_csv(rows, os.path.join(args.out, "check.csv"))
    _write_manifest(args, [args.fit, args.data])


def _eval_one(task):
    seed, data, stem, first, last, cfg_dict, ocfg_dict, j = task
    rng = np.random.default_rng(seed)
    if data is None:
        sched, grid = default_schedule()
        series, _ = simulate(sched, default_regimes(), rng, grid)
    else:
        series = load_series(data, stem)
    cfg = ModelConfig(**cfg_dict)
    ocfg = ModelConfig(**ocfg_dict)
    return forecast_protocol(series, first, last, cfg, j, ocfg, rng)


def cmd_eval(args):
    if args.data is None and args.replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    if args.data is not None:
        _load_series_arg(args.data, args.stem)
        seeds = [args.seed]
    else:
        seeds = [int(s.generate_state(1)[0])
                 for s in np.random.SeedSequence(args.seed).spawn(args.replicates)]
    cfg = _model_config(args, int(args.H))
    online_iters = args.online_iters or args.iters
    online_burn = args.online_burn if args.online_burn is not None else args.burn // 2
    try:
        ocfg = ModelConfig(H=cfg.H, n_iter=online_iters, burn_in=online_burn,
                           thin=cfg.thin)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    # command line uses 1-based paper-style t_i; the library is 0-based
    first, last = args.first - 1, args.last - 1
    tasks = [(s, args.data, args.stem, first, last, cfg.to_dict(), ocfg.to_dict(),
              args.j) for s in seeds]
    if args.workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_eval_one, tasks))
    else:
        results = [_eval_one(t) for t in tasks]
    with open(os.path.join(args.out, "eval_forecast.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "time_index", "auc"])
        for r, rows in enumerate(results):
            for t, a in rows:
                w.writerow([r, t, "NA" if is_undefined(a) else repr(float(a))])
    _write_manifest(args, [args.data])


# ---------------------------------------------------------------------------
# parser

def _add_common(p):
    p.add_argument("--config", help="JSON file of option values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_sampler(p, iters=5000, burn=1000):
    p.add_argument("--iters", type=int, default=iters)
    p.add_argument("--burn", type=int, default=burn)
    p.add_argument("--thin", type=int, default=1)
    for name in ("a_mu", "b_mu", "a_z", "b_z", "a_x", "b_x", "a_m", "b_m"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float,
                       default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladynet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("simulate", help="simulate the five-regime benchmark")
    _add_common(p)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--t-end", type=float, default=15.0)
    p.add_argument("--levels", type=float, nargs="+", default=None)
    p.add_argument("--schedule", default=None, help="schedule JSON file")
    p.add_argument("--replicates", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model by Gibbs sampling")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--data", required=False)
    p.add_argument("--stem", default="series")
    p.add_argument("--H", default="2", help="latent dimension or 'auto'")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--max-H", type=int, default=8)
    p.add_argument("--pi-thin", type=int, default=1)
    p.add_argument("--no-pi", action="store_true", help="skip posterior_pi.bin")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="one-step-ahead forecast")
    _add_common(p)
    p.add_argument("--fit", required=False)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("update", help="online update with new networks")
    _add_common(p)
    _add_sampler(p, burn=500)
    p.add_argument("--fit", required=False)
    p.add_argument("--data", required=False)
    p.add_argument("--stem", default="series")
    p.add_argument("--j", type=int, default=DEFAULT_LOOKBACK)
    p.add_argument("--pi-thin", type=int, default=1)
    p.add_argument("--no-pi", action="store_true")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("predict", help="score a replicate series")
    _add_common(p)
    p.add_argument("--fit", required=False)
    p.add_argument("--data", required=False)
    p.add_argument("--stem", default="series")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("check", help="posterior predictive checks")
    _add_common(p)
    p.add_argument("--fit", required=False)
    p.add_argument("--data", required=False)
    p.add_argument("--stem", default="series")
    p.add_argument("--labels", nargs="*", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="update-then-forecast evaluation loop")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--data", default=None,
                   help="series directory; default simulates fresh replicates")
    p.add_argument("--stem", default="series")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--H", default="2")
    p.add_argument("--j", type=int, default=DEFAULT_LOOKBACK)
    p.add_argument("--first", type=int, default=44, help="first update time (1-based)")
    p.add_argument("--last", type=int, default=49, help="last update time (1-based)")
    p.add_argument("--online-iters", type=int, default=None)
    p.add_argument("--online-burn", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)
    return parser


_REQUIRED = {"fit": ["data"], "forecast": ["fit"], "update": ["fit", "data"],
             "predict": ["fit", "data"], "check": ["fit", "data"]}


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - known - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        file_cfg.pop("command", None)
        sub.set_defaults(**file_cfg)
        args = parser.parse_args(argv)
    if args.seed is None:
        raise ConfigError("--seed is required (flag or config file)")
    if args.out is None:
        raise ConfigError("--out is required (flag or config file)")
    for name in _REQUIRED.get(args.command, []):
        if getattr(args, name) is None:
            raise ConfigError(f"--{name} is required")
    return args


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except ConfigError as exc:
        print(f"ladynet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        os.makedirs(args.out, exist_ok=True)
        args.func(args)
    except ConfigError as exc:
        print(f"ladynet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"ladynet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ladynet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"ladynet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
