"""Command-line entry point: ``impulsegame <command> CONFIG [options]``.

Exit codes: 0 verified, 2 root found but not verified, 3 failure, 4 config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .config import ConfigError, load_config
from .diffusion import IntegrabilityError
from .solver import SolverOptions
from .values import DegenerateThresholds, InvalidThresholds, Player, Thresholds

EXIT_OK, EXIT_UNVERIFIED, EXIT_FAILURE, EXIT_CONFIG = 0, 2, 3, 4

log = logging.getLogger("impulsegame")


class UsageError(Exception):
    pass


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _close_out(fh):
    if fh is not sys.stdout:
        fh.close()


def _parse_kv(text: str, allowed: dict) -> dict:
    """``"n=20000,dt=1e-4"`` -> typed dict; keys and types from ``allowed``."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in allowed:
            raise UsageError(f"unknown key {k!r}; expected one of {', '.join(allowed)}")
        try:
            out[k] = allowed[k](v)
        except ValueError:
            raise UsageError(f"bad value for {k}: {v!r}") from None
    return out


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


MC_KEYS = {"n": int, "dt": float, "horizon": float, "seed": int, "antithetic": _bool}


def _thresholds(args) -> Thresholds | None:
    if getattr(args, "b", None) is None:
        return None
    try:
        return Thresholds(*args.b)
    except InvalidThresholds as exc:
        raise UsageError(str(exc)) from exc


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, tol=args.tol)


def _resolve_thresholds(args, cfg):
    """Thresholds from ``--b`` or, failing that, a fresh solve (None on failure)."""
    th = _thresholds(args)
    if th is not None:
        return th
    from .reporting import solve_and_verify
    rep, res, _ = solve_and_verify(cfg, opts=_solver_opts(args), n_points=1000)
    if res is None:
        print("; ".join(rep.messages), file=sys.stderr)
        return None
    return res.thresholds


# --- commands -------------------------------------------------------------------

def cmd_solve(args, cfg) -> int:
    from .reporting import monte_carlo_block, solve_and_verify
    init = _thresholds(args)
    rep, res, _ = solve_and_verify(cfg, initial=init, opts=_solver_opts(args),
                                   n_points=args.n_points, multistart=args.multistart)
    if res is not None and args.mc is not None:
        kw = {"n": 20_000, "dt": 1e-4, "horizon": 300.0, "seed": 0, "antithetic": True}
        kw.update(_parse_kv(args.mc, MC_KEYS))

        def progress(i, n):
            if args.progress and (i % max(1, n // 20) == 0 or i == n):
                print(f"mc {i}/{n}", file=sys.stderr)

        rep.monte_carlo = monte_carlo_block(cfg, res.thresholds, tuple(args.mc_x0), n_paths=kw["n"],
                                            dt=kw["dt"], horizon=kw["horizon"], seed=kw["seed"],
                                            antithetic=kw["antithetic"], progress=progress)
    fh = _open_out(args.output)
    fh.write(rep.to_json() + "\n")
    _close_out(fh)
    for m in rep.messages:
        print(m, file=sys.stderr)
    return rep.exit_code


def cmd_verify(args, cfg) -> int:
    from .verification import verify
    th = _thresholds(args)
    try:
        vr = verify(cfg, th, n_points=args.n_points, spacing=args.spacing)
    except DegenerateThresholds as exc:
        print(f"degenerate thresholds: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    fh = _open_out(args.output)
    fh.write(json.dumps(vr.to_dict(), indent=2) + "\n")
    _close_out(fh)
    for name, ok in vr.conditions().items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return EXIT_OK if vr.passed else EXIT_UNVERIFIED


def cmd_values(args, cfg) -> int:
    from .values import EquilibriumValues
    th = _resolve_thresholds(args, cfg)
    if th is None:
        return EXIT_FAILURE
    lo = th.b11 if args.lo is None else args.lo
    hi = th.b22 if args.hi is None else args.hi
    if not 0 < lo < hi:
        raise UsageError("need 0 < lo < hi")
    x = np.linspace(lo, hi, args.n)
    ev = EquilibriumValues.build(cfg, th)
    cols = {"x": x}
    for tag, p in (("1", Player.FIRM), ("2", Player.GOVERNMENT)):
        cols["v" + tag] = ev.value(p, x)
    for tag, p in (("1", Player.FIRM), ("2", Player.GOVERNMENT)):
        # at the kinks take the limit from inside the joint inaction region
        right, left = ev.derivative(p, x, side="right"), ev.derivative(p, x, side="left")
        cols["dv" + tag] = np.where(x == th.b22, left, right)
    if args.baselines:
        from .baselines import solve_firm_alone, solve_government_alone
        cols["v1_alone"] = solve_firm_alone(cfg).value(x)
        cols["v2_alone"] = solve_government_alone(cfg).value(x)
    fh = _open_out(args.output)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(cols))
    for row in zip(*cols.values()):
        w.writerow([repr(float(v)) for v in row])
    _close_out(fh)
    return EXIT_OK


def cmd_sweep(args, cfg) -> int:
    from .reporting import SweepSpec, run_sweep, write_sweep
    try:
        spec = SweepSpec(args.param, args.lo, args.hi, args.steps, warm_start=not args.cold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_sweep(cfg, spec, _solver_opts(args), n_points=args.n_points)
    fh = _open_out(args.output)
    write_sweep(rows, spec.parameter, fh, delimiter=args.delimiter)
    _close_out(fh)
    if any(r.thresholds is None for r in rows):
        return EXIT_FAILURE
    return EXIT_OK if all(r.verified for r in rows) else EXIT_UNVERIFIED


def cmd_simulate(args, cfg) -> int:
    from .montecarlo import SimOptions, simulate_path, write_path_events
    th = _resolve_thresholds(args, cfg)
    if th is None:
        return EXIT_FAILURE
    opts = SimOptions(dt=args.dt, horizon=args.horizon, n_paths=1, seed=args.seed)
    rec = simulate_path(cfg, th, args.x0, opts)
    fh = _open_out(args.output)
    write_path_events(rec, fh)
    _close_out(fh)
    print(f"firm payoff {rec.discounted_profit!r}, government cost {rec.discounted_cost!r}, "
          f"{len(rec.xi)} firm / {len(rec.eta)} government interventions", file=sys.stderr)
    return EXIT_OK


def cmd_baseline(args, cfg) -> int:
    from .baselines import BaselineError, solve_firm_alone, solve_government_alone
    out = {}
    code = EXIT_OK
    for name, fn in (("firm", solve_firm_alone), ("government", solve_government_alone)):
        if args.player not in ("both", name):
            continue
        try:
            s = fn(cfg)
            out[name] = {"trigger": s.trigger, "target": s.target, "coefficient": s.coefficient,
                         "residuals": list(s.residuals)}
        except (BaselineError, IntegrabilityError) as exc:
            out[name] = {"error": str(exc)}
            code = EXIT_FAILURE
    fh = _open_out(args.output)
    fh.write(json.dumps(out, indent=2) + "\n")
    _close_out(fh)
    return code


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="impulsegame",
                                 description="Impulse-control pollution game: solve, verify, simulate.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, thresholds=False, solver=False):
        p.add_argument("config", help="config file or shipped name (e.g. table1)")
        p.add_argument("--allow-unchecked", action="store_true",
                       help="accept configs that fail the integrability check")
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        if thresholds:
            p.add_argument("--b", nargs=4, type=float, metavar=("B11", "B12", "B21", "B22"))
        if solver:
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--max-iter", type=int, default=100)

    p = sub.add_parser("solve", help="solve for the equilibrium thresholds and verify them")
    common(p, thresholds=True, solver=True)
    p.add_argument("--multistart", action="store_true", help="search from a grid of starts")
    p.add_argument("--n-points", type=int, default=10_000)
    p.add_argument("--mc", default=None, metavar="KEY=VAL,...",
                   help="add a Monte-Carlo check; keys n, dt, horizon, seed, antithetic")
    p.add_argument("--mc-x0", type=float, nargs="+", default=[0.2, 0.3, 0.5])
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check the verification conditions for given thresholds")
    common(p)
    p.add_argument("--b", nargs=4, type=float, required=True, metavar=("B11", "B12", "B21", "B22"))
    p.add_argument("--n-points", type=int, default=10_000)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("values", help="tabulate v1, v2 and their derivatives")
    common(p, thresholds=True, solver=True)
    p.add_argument("--n", type=int, default=201)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--baselines", action="store_true", help="add single-agent value columns")
    p.set_defaults(func=cmd_values)

    p = sub.add_parser("sweep", help="comparative statics over one parameter")
    common(p, solver=True)
    p.add_argument("--param", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=13)
    p.add_argument("--cold", action="store_true", help="do not warm-start from the previous root")
    p.add_argument("--n-points", type=int, default=2000)
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="simulate one controlled path and dump its events")
    common(p, thresholds=True, solver=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--horizon", type=float, default=300.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="solve the single-agent problems")
    common(p)
    p.add_argument("--player", choices=("firm", "government", "both"), default="both")
    p.set_defaults(func=cmd_baseline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, allow_unchecked=args.allow_unchecked)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (IntegrabilityError, DegenerateThresholds, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
