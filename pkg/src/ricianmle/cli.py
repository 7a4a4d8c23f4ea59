"""Command-line front end.

    ricianmle detect      one scenario, one detector
    ricianmle sweep       Monte Carlo threshold sweep -> CSV + summary JSON
    ricianmle bench       wall-time comparison of the two strategies -> CSV
    ricianmle verify      oracle suites, nonzero exit on failure
    ricianmle complexity  flop model and crossover thresholds
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from .config import ConfigError, RunConfig, parse_config, parse_omega

_FLAG_FIELDS = {
    "case": "case", "N": "N", "M": "M", "L": "L", "D": "D", "Omega": "Omega", "Q": "Q",
    "noise_var": "noise_var", "active_prob": "active_prob", "g": "g",
    "kappa_db": "kappa_db", "kappa_linear": "kappa_linear", "trials": "n_trials",
    "seed": "master_seed", "strategy": "strategy", "epsilon": "epsilon",
    "max_iters": "max_iters", "threads": "threads", "csv": "csv_path", "json": "json_path",
}


def fmt(x) -> str:
    """Fixed scientific notation, 9 significant digits."""
    return f"{float(x):.8e}"


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--case")
    for name in ("N", "M", "L", "D", "Q"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--Omega", help="max CFO as a multiple of pi, e.g. 0.5pi or pi")
    p.add_argument("--noise-var", dest="noise_var", type=float)
    p.add_argument("--active-prob", dest="active_prob", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--kappa-db", dest="kappa_db", type=float)
    p.add_argument("--kappa-linear", dest="kappa_linear", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=("direct", "fft", "auto"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--csv")
    p.add_argument("--json")


def _config_from_args(args, skip=()) -> RunConfig:
    over = {}
    for flag, key in _FLAG_FIELDS.items():
        if flag in skip:
            continue
        val = getattr(args, flag, None)
        if val is not None:
            over[key] = val
    return parse_config(getattr(args, "config", None), over)


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_detect(args) -> int:
    from .harness import make_instance, resolve_strategy, detect, trial_rng, binarize, error_probability
    cfg = _config_from_args(args)
    inst = make_instance(cfg, trial_rng(cfg.master_seed, args.trial))
    strategy = resolve_strategy(cfg)
    res, ns = detect(inst.problem, strategy, cfg.epsilon, cfg.max_iters)
    a_bin = binarize(res.a_hat, args.theta)
    out = {
        "case": cfg.case.value, "strategy": strategy, "n_active_true": int(inst.a_true.sum()),
        "n_detected": int(a_bin.sum()), "theta": fmt(args.theta),
        "error_prob": fmt(error_probability(inst.a_true, a_bin)),
        "objective": fmt(res.objective_trace[-1]), "iterations": res.iterations,
        "converged": bool(res.converged), "wall_time_ns": int(ns),
        "detected": [],
    }
    for n in np.flatnonzero(a_bin):
        item = {"device": int(n), "a_hat": fmt(res.a_hat[n]), "active_true": int(inst.a_true[n])}
        if cfg.case.value != "sync":
            item["t_hat"] = int(res.t_hat[n])
            item["omega_hat"] = fmt(res.omega_hat[n])
        out["detected"].append(item)
    _emit(json.dumps(out, indent=2) + "\n", cfg.json_path)
    return 0


def sweep_csv(sw) -> str:
    buf = io.StringIO(newline="")
    buf.write("theta,error_prob,std_err\n")
    for th, e, s in zip(sw.theta_grid, sw.error_prob, sw.std_err):
        buf.write(f"{fmt(th)},{fmt(e)},{fmt(s)}\n")
    return buf.getvalue()


def cmd_sweep(args) -> int:
    from .harness import run_trials
    cfg = _config_from_args(args)
    _, sw = run_trials(cfg)
    _emit(sweep_csv(sw), cfg.csv_path)
    summary = {"theta_star": fmt(sw.theta_star), "error_star": fmt(sw.error_star),
               "std_star": fmt(sw.std_star), "median_iters": fmt(sw.median_iters),
               "median_time_ns": fmt(sw.median_time_ns), "n_trials": sw.n_trials,
               "n_failed": sw.n_failed, "config": cfg.to_dict()}
    text = json.dumps(summary, indent=2) + "\n"
    if cfg.json_path:
        _emit(text, cfg.json_path)
    elif cfg.csv_path:
        sys.stdout.write(text)
    return 0


def _list(text, conv):
    return [conv(v) for v in str(text).split(",") if v.strip()]


def cmd_bench(args) -> int:
    from dataclasses import replace
    from .harness import timing_compare
    from .config import _validate
    cfg = _config_from_args(args, skip=("D", "Omega", "Q"))
    Ds = _list(args.D_list, int) if args.D_list else [cfg.D]
    Os = _list(args.Omega_list, parse_omega) if args.Omega_list else [cfg.Omega]
    Qs = _list(args.Q_list, int) if args.Q_list else [cfg.Q]
    grid = []
    for D in Ds:
        for Om in Os:
            for Q in Qs:
                c = replace(cfg, D=D, Omega=Om, Q=Q)
                try:
                    _validate(c)
                except ConfigError as exc:
                    raise ConfigError(exc.field, f"bench grid point D={D}, Q={Q}: {exc}") from None
                grid.append(c)
    rows = timing_compare(grid, n_trials=args.trials or 5)
    rows.sort(key=lambda r: (r["case"], r["D"], r["omega_over_pi"], r["Q"], r["strategy"]))
    buf = io.StringIO(newline="")
    buf.write("case,D,omega_over_pi,Q,strategy,median_time_ns,flops_model\n")
    for r in rows:
        buf.write(f"{r['case']},{r['D']},{fmt(r['omega_over_pi'])},{r['Q']},{r['strategy']},"
                  f"{fmt(r['median_time_ns'])},{fmt(r['flops_model'])}\n")
    _emit(buf.getvalue(), cfg.csv_path)
    if not all(r["identical"] for r in rows):
        raise RuntimeError("strategies produced different iterates on a timed instance")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suites
    results = run_suites(quick=args.quick, names=args.suite or None)
    for r in results:
        print(r.line())
    n_ok = sum(r.passed for r in results)
    print(json.dumps({"suites": len(results), "passed": n_ok, "failed": len(results) - n_ok}))
    return 0 if n_ok == len(results) else 1


def cmd_complexity(args) -> int:
    from .complexity import (crossover_thresholds, flops_direct_per_device, flops_fft_per_device,
                             recommend_strategy)
    from .model import CaseId
    case = CaseId.parse(args.case or "t")
    L, M, Q, D = args.L or 60, args.M or 48, args.Q or 128, 4 if args.D is None else args.D
    Om = parse_omega(args.Omega) if args.Omega else math.pi
    lines = [f"case = {case.value}"]
    if case is not CaseId.SYNC:
        Dc = D if case.has_sto else 0
        Oc = Om if case.has_cfo else 0.0
        lines.append(f"flops_direct = {fmt(flops_direct_per_device(case, L, M, Dc, Oc, Q))}")
        lines.append(f"flops_fft = {fmt(flops_fft_per_device(case, L, M, Dc, Oc, Q))}")
        rec = recommend_strategy(case, L, M, Dc, Oc, Q)
        lines.append(f"recommended = {rec.strategy}{' (band)' if rec.band else ''}")
    th = crossover_thresholds(L, M, Q, D, Om)
    for k, v in th.__dict__.items():
        suffix = f"  ({fmt(v / math.pi)} pi)" if k.startswith("Omega") else ""
        lines.append(f"{k} = {fmt(v)}{suffix}")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ricianmle", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run one scenario")
    _add_config_flags(p)
    p.add_argument("--trial", type=int, default=0, help="trial index within the seed stream")
    p.add_argument("--theta", type=float, default=0.5)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="Monte Carlo threshold sweep")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="strategy timing over a (D, Omega, Q) grid")
    _add_config_flags(p)
    p.add_argument("--D-list", dest="D_list")
    p.add_argument("--Omega-list", dest="Omega_list")
    p.add_argument("--Q-list", dest="Q_list")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the oracle suites")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--suite", action="append")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("complexity", help="flop model and thresholds")
    p.add_argument("--case")
    for name in ("L", "M", "Q", "D"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--Omega")
    p.set_defaults(func=cmd_complexity)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        err = {"error": "config", "field": exc.field, "message": str(exc)}
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        err = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(err) + "\n")
    return 2


if __name__ == "__main__":
    sys.exit(main())
